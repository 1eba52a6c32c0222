# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Line-delimited JSON for task datasets

Each split is one `<split>.jsonl` file, one example per line:

    {"tokens": [1, 17, ...], "segments": [0, 0, ...], "label": 1}

`label` is a list of per-position tags for tagging tasks, -100 marking untagged positions. A `task.json` file
next to the splits records kind, seed, number of labels and the grammar.
"""
import json
from os import PathLike
from pathlib import Path
from typing import Iterator, List

import numpy as np

from .datasets import Split, TaskDataset, TaskKind
from .exceptions import TaskGenerationError
from .grammar import GrammarParams

TASK_FILE_NAME = "task.json"


def iter_examples(split: Split) -> Iterator[dict]:
    for tokens, segments, label in zip(split.tokens.tolist(), split.segments.tolist(), split.labels.tolist()):
        yield {"tokens": tokens, "segments": segments, "label": label}


def dump_split(split: Split, path: PathLike):
    with open(path, "w") as fp:
        for example in iter_examples(split):
            fp.write(json.dumps(example) + "\n")


def load_split(path: PathLike) -> Split:
    tokens: List[List[int]] = []
    segments: List[List[int]] = []
    labels: list = []
    with open(path, "r") as fp:
        for lineno, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                example = json.loads(line)
                tokens.append(example["tokens"])
                segments.append(example.get("segments") or [0] * len(example["tokens"]))
                labels.append(example["label"])
            except (json.JSONDecodeError, KeyError) as e:
                raise TaskGenerationError(f"{path}:{lineno}: malformed example, detail: {e}")
    if not tokens:
        raise TaskGenerationError(f"{path} holds no example")
    return Split(
        tokens=np.asarray(tokens, dtype=np.int64),
        segments=np.asarray(segments, dtype=np.int64),
        labels=np.asarray(labels, dtype=np.int64),
    )


def save_dataset(dataset: TaskDataset, directory: PathLike) -> Path:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    dump_split(dataset.train, root / "train.jsonl")
    dump_split(dataset.dev, root / "dev.jsonl")
    meta = {
        "kind": dataset.kind.value,
        "seed": dataset.seed,
        "num_labels": dataset.num_labels,
        "grammar": dataset.grammar.model_dump(),
    }
    (root / TASK_FILE_NAME).write_text(json.dumps(meta, indent=2) + "\n")
    return root


def load_dataset(directory: PathLike) -> TaskDataset:
    root = Path(directory)
    meta = json.loads((root / TASK_FILE_NAME).read_text())
    return TaskDataset(
        kind=TaskKind(meta["kind"]),
        train=load_split(root / "train.jsonl"),
        dev=load_split(root / "dev.jsonl"),
        seed=meta["seed"],
        num_labels=meta["num_labels"],
        grammar=GrammarParams(**meta["grammar"]),
    )

# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Layout of the output directory

    <out>/
      metadata.json             command invocations and timestamps, the only non-deterministic file
      checkpoints/pretrained.json(.bin)
      checkpoints/deltas/<task>__<regime>__seed<k>.json(.bin)
      runs/<task>__<regime>.json
      runs/pretrain_log.json, runs/sweep.json
      tables/*.csv
      figures/*.svg
"""
import csv
import datetime
import json
import logging
import re
from dataclasses import dataclass
from os import PathLike
from pathlib import Path
from typing import Any, Iterable, List, Sequence

from bitfit_lab import __version__

from .exceptions import MissingArtifactError

logger = logging.getLogger(__name__)

METADATA_FILE_NAME = "metadata.json"
PRETRAINED_CHECKPOINT = "pretrained.json"
RANDOM_BASE_CHECKPOINT = "random_base.json"
PRETRAIN_LOG = "pretrain_log.json"
SWEEP_RUN = "sweep.json"
RESERVED_RUN_FILES = (PRETRAIN_LOG, SWEEP_RUN)

_UNSAFE_CHARS = re.compile(r"[^A-Za-z0-9_.-]+")


def slugify(text: str) -> str:
    """File-name-safe form of a task or selector text"""
    return _UNSAFE_CHARS.sub("_", text).strip("_") or "_"


@dataclass(frozen=True)
class OutputLayout:
    root: Path

    @classmethod
    def create(cls, root: PathLike) -> "OutputLayout":
        layout = cls(Path(root))
        for directory in (layout.checkpoints, layout.deltas, layout.runs, layout.tables, layout.figures):
            directory.mkdir(parents=True, exist_ok=True)
        return layout

    @property
    def checkpoints(self) -> Path:
        return self.root / "checkpoints"

    @property
    def deltas(self) -> Path:
        return self.checkpoints / "deltas"

    @property
    def runs(self) -> Path:
        return self.root / "runs"

    @property
    def tables(self) -> Path:
        return self.root / "tables"

    @property
    def figures(self) -> Path:
        return self.root / "figures"

    @property
    def pretrained(self) -> Path:
        return self.checkpoints / PRETRAINED_CHECKPOINT

    def run_path(self, task: str, regime: str) -> Path:
        return self.runs / f"{slugify(task)}__{slugify(regime)}.json"

    def delta_path(self, task: str, regime: str, seed: int) -> Path:
        return self.deltas / f"{slugify(task)}__{slugify(regime)}__seed{seed}.json"

    def run_files(self) -> List[Path]:
        """Fine-tuning run files in name order"""
        require(self.runs, "runs directory, run the finetune command first")
        return sorted(p for p in self.runs.glob("*.json") if p.name not in RESERVED_RUN_FILES)


def require(path: Path, what: str) -> Path:
    """:raises: MissingArtifactError naming the missing path"""
    if not path.exists():
        raise MissingArtifactError(f"missing {what}: {path}")
    return path


def write_json(data: Any, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path: PathLike, what: str = "artifact") -> Any:
    return json.loads(require(Path(path), what).read_text(encoding="utf-8"))


def write_table(path: PathLike, schema: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """CSV with a leading `# schema=` line"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fp:
        fp.write(f"# schema={schema}\n")
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def read_table(path: PathLike) -> List[dict]:
    with Path(path).open("r", encoding="utf-8", newline="") as fp:
        lines = [line for line in fp if not line.startswith("#")]
    return list(csv.DictReader(lines))


def record_invocation(layout: OutputLayout, command: str, **details):
    """Append one entry to metadata.json, the file every timestamp is confined to"""
    path = layout.root / METADATA_FILE_NAME
    metadata = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {"invocations": []}
    metadata["version"] = __version__
    metadata["invocations"].append(
        {
            "command": command,
            "time": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            **{k: str(v) for k, v in details.items()},
        }
    )
    write_json(metadata, path)

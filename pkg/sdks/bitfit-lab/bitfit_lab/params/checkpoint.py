# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Checkpoint files: a JSON manifest and a raw blob of little-endian float64 values

The manifest `<stem>.json` looks like:

    {
      "format": "bitfit-lab-checkpoint",
      "version": 1,
      "dtype": "<f8",
      "blob": "<stem>.bin",
      "sha256": "<digest of the blob>",
      "metadata": {...},
      "entries": [{"name": "...", "shape": [..], "offset": <byte offset>}, ...]
    }

Entries are stored back to back in manifest order, so a round trip is bit-exact.
"""
import hashlib
import json
import logging
from collections import OrderedDict
from dataclasses import dataclass
from os import PathLike
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .exceptions import CheckpointMismatchError, CorruptCheckpointError
from .selectors import Resolution
from .store import ParameterStore, ParamSnapshot

logger = logging.getLogger(__name__)

FORMAT_NAME = "bitfit-lab-checkpoint"
FORMAT_VERSION = 1
DTYPE = "<f8"


def save_checkpoint(snap: ParamSnapshot, path: PathLike, metadata: Optional[Dict[str, str]] = None) -> Path:
    """Write `snap` to the manifest `path` and a sibling ".bin" blob

    :returns: path of the manifest
    """
    manifest_path = Path(path)
    blob_path = manifest_path.with_suffix(".bin")
    manifest_path.parent.mkdir(parents=True, exist_ok=True)

    entries = []
    chunks = []
    offset = 0
    for name, arr in snap.arrays.items():
        raw = np.ascontiguousarray(arr, dtype=DTYPE).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    blob = b"".join(chunks)

    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "dtype": DTYPE,
        "blob": blob_path.name,
        "sha256": hashlib.sha256(blob).hexdigest(),
        "metadata": dict(sorted({**snap.metadata, **(metadata or {})}.items())),
        "entries": entries,
    }
    blob_path.write_bytes(blob)
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    logger.debug("checkpoint with %d entries written to %s", len(entries), manifest_path)
    return manifest_path


def load_checkpoint(path: PathLike) -> ParamSnapshot:
    """Read a checkpoint written by `save_checkpoint`

    :raises: FileNotFoundError when the manifest or blob is missing, CorruptCheckpointError when either
        cannot be decoded
    """
    manifest_path = Path(path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise CorruptCheckpointError(f"manifest {manifest_path} is not valid JSON: {e}")
    if manifest.get("format") != FORMAT_NAME or manifest.get("version") != FORMAT_VERSION:
        raise CorruptCheckpointError(f"{manifest_path} is not a version {FORMAT_VERSION} checkpoint manifest")
    if manifest.get("dtype") != DTYPE:
        raise CorruptCheckpointError(f"unsupported dtype {manifest.get('dtype')!r} in {manifest_path}")

    blob_path = manifest_path.parent / manifest["blob"]
    blob = blob_path.read_bytes()
    if hashlib.sha256(blob).hexdigest() != manifest["sha256"]:
        raise CorruptCheckpointError(f"blob {blob_path} does not match the digest in {manifest_path}")

    arrays: "OrderedDict[str, np.ndarray]" = OrderedDict()
    itemsize = np.dtype(DTYPE).itemsize
    for entry in manifest["entries"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        start = entry["offset"]
        if start + count * itemsize > len(blob):
            raise CorruptCheckpointError(f"entry {entry['name']} runs past the end of {blob_path}")
        values = np.frombuffer(blob, dtype=DTYPE, count=count, offset=start)
        arrays[entry["name"]] = values.astype(np.float64).reshape(shape)
    return ParamSnapshot(arrays, metadata=dict(manifest.get("metadata", {})))


@dataclass
class TaskDelta:
    """Values of the entries a fine-tuning run trained, to be applied on top of a shared base

    :param values: trained entries, heads included
    :param base_digest: digest of the base snapshot the run started from, empty when unknown
    :param selector: text form of the selector which produced the delta
    """

    values: ParamSnapshot
    base_digest: str = ""
    selector: str = ""

    @property
    def num_elements(self) -> int:
        return sum(arr.size for arr in self.values.arrays.values())


def export_task_delta(store: ParameterStore, resolution: Resolution, base_digest: str = "") -> TaskDelta:
    """Keep only the entries `resolution` made trainable"""
    arrays = OrderedDict((name, store[name].data.copy()) for name in resolution.trainable_names())
    return TaskDelta(ParamSnapshot(arrays), base_digest=base_digest, selector=resolution.selector.to_text())


def apply_task_delta(base: ParamSnapshot, delta: TaskDelta) -> ParamSnapshot:
    """Full parameter state of a fine-tuned model: `base` with the delta's entries replaced or appended

    :raises: CheckpointMismatchError when the delta was exported against another base or reshapes an entry
    """
    if delta.base_digest and delta.base_digest != base.digest():
        raise CheckpointMismatchError("task delta was exported against a different base checkpoint")
    arrays = OrderedDict((name, arr.copy()) for name, arr in base.arrays.items())
    for name, arr in delta.values.arrays.items():
        if name in arrays and arrays[name].shape != arr.shape:
            raise CheckpointMismatchError(f"delta entry {name} has shape {arr.shape}, base has {arrays[name].shape}")
        arrays[name] = arr.copy()
    return ParamSnapshot(arrays)


def save_task_delta(delta: TaskDelta, path: PathLike) -> Path:
    return save_checkpoint(
        delta.values, path, metadata={"kind": "task_delta", "base": delta.base_digest, "selector": delta.selector}
    )


def load_task_delta(path: PathLike) -> TaskDelta:
    snap = load_checkpoint(path)
    if snap.metadata.get("kind") != "task_delta":
        raise CorruptCheckpointError(f"{path} is not a task delta")
    return TaskDelta(snap, base_digest=snap.metadata.get("base", ""), selector=snap.metadata.get("selector", ""))

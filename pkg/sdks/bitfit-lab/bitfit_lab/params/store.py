# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
import hashlib
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Collection, Dict, Iterator, List, Optional, Tuple

import numpy as np

from bitfit_lab.autodiff import Tensor

from .exceptions import CheckpointMismatchError, DuplicateParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ParamSpec:
    """Name and shape of one store entry"""

    name: str
    shape: Tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))


@dataclass(frozen=True)
class ParamLayout:
    """Shape-only description of a store, enough to resolve selectors and count parameters without
    allocating any weight.
    """

    entries: Tuple[ParamSpec, ...] = ()

    def __iter__(self) -> Iterator[ParamSpec]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, name: str) -> bool:
        return any(spec.name == name for spec in self.entries)

    def names(self) -> List[str]:
        return [spec.name for spec in self.entries]

    def shape_of(self, name: str) -> Tuple[int, ...]:
        for spec in self.entries:
            if spec.name == name:
                return spec.shape
        raise KeyError(name)

    @property
    def total(self) -> int:
        return sum(spec.size for spec in self.entries)

    @classmethod
    def from_shapes(cls, shapes: Collection[Tuple[str, Tuple[int, ...]]]) -> "ParamLayout":
        seen = set()
        entries = []
        for name, shape in shapes:
            if name in seen:
                raise DuplicateParameterError(f"parameter {name} listed twice")
            seen.add(name)
            entries.append(ParamSpec(name, tuple(int(d) for d in shape)))
        return cls(tuple(entries))


@dataclass
class ParamSnapshot:
    """Bit-exact copy of every entry of a store

    :param arrays: entry name -> float64 array, in store order
    :param metadata: free-form string annotations, persisted with checkpoints
    """

    arrays: Dict[str, np.ndarray] = field(default_factory=OrderedDict)
    metadata: Dict[str, str] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self.arrays

    def names(self) -> List[str]:
        return list(self.arrays)

    @property
    def layout(self) -> ParamLayout:
        return ParamLayout(tuple(ParamSpec(name, arr.shape) for name, arr in self.arrays.items()))

    def digest(self) -> str:
        """sha256 over names, shapes and little-endian values, used as the snapshot id"""
        hasher = hashlib.sha256()
        for name, arr in self.arrays.items():
            hasher.update(name.encode("utf-8"))
            hasher.update(repr(arr.shape).encode("ascii"))
            hasher.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return hasher.hexdigest()

    def equals(self, other: "ParamSnapshot") -> bool:
        """Bit-level equality of names, shapes and values"""
        if self.names() != other.names():
            return False
        return all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.arrays.values(), other.arrays.values())
        )


class ParameterStore:
    """Ordered registry of named parameter tensors

    Trainability lives on the tensors themselves (`requires_grad`), the store only keeps names unique
    and offers bulk operations over entries.
    """

    def __init__(self):
        self._entries: "OrderedDict[str, Tensor]" = OrderedDict()

    def add(self, name: str, data: np.ndarray, requires_grad: bool = True) -> Tensor:
        if name in self._entries:
            raise DuplicateParameterError(f"parameter {name} already exists")
        tensor = Tensor(data, requires_grad=requires_grad, name=name)
        self._entries[name] = tensor
        return tensor

    def remove(self, name: str) -> Tensor:
        return self._entries.pop(name)

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def get(self, name: str) -> Optional[Tensor]:
        return self._entries.get(name)

    def names(self) -> List[str]:
        return list(self._entries)

    def items(self) -> List[Tuple[str, Tensor]]:
        return list(self._entries.items())

    @property
    def layout(self) -> ParamLayout:
        return ParamLayout(tuple(ParamSpec(name, t.shape) for name, t in self._entries.items()))

    @property
    def num_elements(self) -> int:
        return sum(t.size for t in self._entries.values())

    def set_trainable(self, names: Collection[str]):
        """Make exactly `names` trainable, freeze everything else"""
        wanted = set(names)
        unknown = wanted.difference(self._entries)
        if unknown:
            raise KeyError(f"unknown parameters: {sorted(unknown)}")
        for name, tensor in self._entries.items():
            tensor.requires_grad = name in wanted

    def trainable_names(self) -> List[str]:
        return [name for name, t in self._entries.items() if t.requires_grad]

    def zero_grad(self):
        for tensor in self._entries.values():
            tensor.zero_grad()

    def filter(self, predicate: Callable[[str], bool]) -> "ParameterStore":
        """A new store sharing the tensors whose names satisfy `predicate`"""
        store = ParameterStore()
        for name, tensor in self._entries.items():
            if predicate(name):
                store._entries[name] = tensor
        return store

    def copy(self) -> "ParameterStore":
        """Deep copy, values and trainable flags included"""
        store = ParameterStore()
        for name, tensor in self._entries.items():
            store.add(name, tensor.data.copy(), requires_grad=tensor.requires_grad)
        return store

    def snapshot(self) -> ParamSnapshot:
        return ParamSnapshot(OrderedDict((name, t.data.copy()) for name, t in self._entries.items()))

    def restore(self, snap: ParamSnapshot):
        """Overwrite every entry with the snapshot's values, in place

        :raises: CheckpointMismatchError when names or shapes differ
        """
        check_compatible(self.layout, snap.layout)
        for name, tensor in self._entries.items():
            np.copyto(tensor.data, snap.arrays[name])

    @classmethod
    def from_snapshot(cls, snap: ParamSnapshot, requires_grad: bool = True) -> "ParameterStore":
        store = cls()
        for name, arr in snap.arrays.items():
            store.add(name, arr.copy(), requires_grad=requires_grad)
        return store

    def __repr__(self) -> str:
        return f"ParameterStore(entries={len(self)}, elements={self.num_elements})"


def check_compatible(target: ParamLayout, source: ParamLayout):
    """Require identical entry names and shapes

    :raises: CheckpointMismatchError naming the missing, unexpected or reshaped entries
    """
    target_names, source_names = target.names(), source.names()
    source_set, target_set = set(source_names), set(target_names)
    missing = [n for n in target_names if n not in source_set]
    unexpected = [n for n in source_names if n not in target_set]
    if missing or unexpected:
        raise CheckpointMismatchError(
            f"entry names differ, missing: {missing}, unexpected: {unexpected}", missing=missing, unexpected=unexpected
        )
    reshaped = [
        f"{spec.name} {spec.shape} != {source.shape_of(spec.name)}"
        for spec in target
        if spec.shape != source.shape_of(spec.name)
    ]
    if reshaped:
        raise CheckpointMismatchError(f"entry shapes differ: {', '.join(reshaped)}")


def snapshot(store: ParameterStore) -> ParamSnapshot:
    return store.snapshot()


def restore(store: ParameterStore, snap: ParamSnapshot):
    store.restore(snap)

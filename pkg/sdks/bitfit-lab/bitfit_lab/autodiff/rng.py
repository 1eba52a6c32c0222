# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
import zlib
from typing import Sequence, Tuple, Union

import numpy as np

Shape = Union[int, Tuple[int, ...]]


class RngStream:
    """A labelled random stream, identical draws for identical (seed, stream_id) on every platform

    Streams are built on numpy's PCG64 bit generator, seeded through a `SeedSequence` made of the seed and a
    CRC32 of the label, so different labels never share state and no process-level hashing is involved.

    :param seed: unsigned 64-bit seed
    :param stream_id: label of the stream, such as "dropout", "init" or "data"
    """

    def __init__(self, seed: int, stream_id: str):
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = int(seed)
        self.stream_id = stream_id
        self._generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self._entropy())))
        self.draws = 0

    def _entropy(self) -> Sequence[int]:
        return [self.seed & 0xFFFFFFFF, self.seed >> 32, zlib.crc32(self.stream_id.encode("utf-8"))]

    def spawn(self, child_id: str) -> "RngStream":
        """Derive an independent stream, e.g. one per job"""
        return RngStream(self.seed, f"{self.stream_id}/{child_id}")

    def random(self, shape: Shape) -> np.ndarray:
        self.draws += 1
        return self._generator.random(shape)

    def normal(self, shape: Shape, std: float = 1.0) -> np.ndarray:
        self.draws += 1
        return self._generator.normal(0.0, std, shape)

    def integers(self, low: int, high: int, shape: Shape = ()) -> np.ndarray:
        self.draws += 1
        return self._generator.integers(low, high, shape)

    def permutation(self, n: int) -> np.ndarray:
        self.draws += 1
        return self._generator.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        self.draws += 1
        return self._generator.choice(n, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id!r}, draws={self.draws})"

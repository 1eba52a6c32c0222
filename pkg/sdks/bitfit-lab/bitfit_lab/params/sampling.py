# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Budget-matched random baselines: uniformly sampled coordinates and whole rows/columns of weight matrices"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Set, Tuple

import numpy as np

from bitfit_lab.autodiff import RngStream

from .exceptions import SamplingError
from .store import ParamLayout

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoordinateMask:
    """Trainable coordinates inside one entry, kept as sorted flat indices

    :param shape: shape of the entry
    :param indices: sorted, unique row-major positions
    """

    shape: Tuple[int, ...]
    indices: np.ndarray

    @property
    def count(self) -> int:
        return int(self.indices.size)

    def to_array(self) -> np.ndarray:
        mask = np.zeros(int(np.prod(self.shape, dtype=np.int64)), dtype=bool)
        mask[self.indices] = True
        return mask.reshape(self.shape)


def _check_fraction(fraction: float):
    if not 0.0 < fraction < 1.0:
        raise SamplingError(f"fraction must lie in (0, 1), got {fraction}")


def sample_rand_uniform(
    layout: ParamLayout, fraction: Optional[float] = None, seed: int = 0, count: Optional[int] = None
) -> Dict[str, CoordinateMask]:
    """Draw coordinates uniformly without replacement across every entry of `layout`

    :param fraction: share of all coordinates to draw, ceil(fraction * total) are drawn
    :param count: exact number of coordinates to draw, takes precedence over `fraction`
    :return: masks of the entries which received at least one coordinate, in layout order
    """
    total = layout.total
    if count is None:
        if fraction is None:
            raise SamplingError("either fraction or count is required")
        _check_fraction(fraction)
        count = math.ceil(fraction * total)
    if not 0 < count <= total:
        raise SamplingError(f"cannot draw {count} coordinates out of {total}")

    picked = np.sort(RngStream(seed, "rand_uniform").choice(total, count))
    bounds = np.cumsum([0] + [spec.size for spec in layout])
    masks: Dict[str, CoordinateMask] = {}
    for spec, start, end in zip(layout, bounds[:-1], bounds[1:]):
        lo, hi = np.searchsorted(picked, [start, end])
        if hi > lo:
            masks[spec.name] = CoordinateMask(spec.shape, (picked[lo:hi] - start).astype(np.int64))
    logger.debug("sampled %d uniform coordinates over %d entries", count, len(masks))
    return masks


@dataclass
class _MatrixPicks:
    rows: Set[int]
    cols: Set[int]
    shape: Tuple[int, int]

    def added_by(self, axis: int) -> int:
        num_rows, num_cols = self.shape
        return num_cols - len(self.cols) if axis == 0 else num_rows - len(self.rows)

    def indices(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[sorted(self.rows), :] = True
        mask[:, sorted(self.cols)] = True
        return np.flatnonzero(mask)


def sample_rand_rowcol(layout: ParamLayout, budget: int, seed: int = 0) -> Dict[str, CoordinateMask]:
    """Pick complete rows or columns of the 2-D entries of `layout` until `budget` coordinates are covered

    Every row and every column of every matrix is one candidate, candidates are visited in a single random
    order. A row crossing an already picked column only adds its uncovered coordinates, so the realized count
    is the size of the union. Sampling stops at the first pick reaching the budget, the overshoot is at most
    one row or column.

    :raises: SamplingError when the budget is below every candidate length or above every matrix coordinate
    """
    matrices = [spec for spec in layout if len(spec.shape) == 2]
    if not matrices:
        raise SamplingError("no weight matrix to sample rows or columns from")
    shortest = min(min(spec.shape) for spec in matrices)
    if budget < shortest:
        raise SamplingError(f"budget {budget} is smaller than the shortest row/column ({shortest})")
    coverable = sum(spec.size for spec in matrices)
    if budget > coverable:
        raise SamplingError(f"budget {budget} exceeds the {coverable} coordinates of all weight matrices")

    # (matrix index, axis, position): axis 0 picks a row, axis 1 a column
    candidates: List[Tuple[int, int, int]] = []
    for i, spec in enumerate(matrices):
        candidates.extend((i, 0, r) for r in range(spec.shape[0]))
        candidates.extend((i, 1, c) for c in range(spec.shape[1]))

    picks: Dict[int, _MatrixPicks] = {}
    realized = 0
    for k in RngStream(seed, "rand_rowcol").permutation(len(candidates)):
        i, axis, pos = candidates[k]
        state = picks.setdefault(i, _MatrixPicks(set(), set(), matrices[i].shape))  # type: ignore[arg-type]
        realized += state.added_by(axis)
        (state.rows if axis == 0 else state.cols).add(pos)
        if realized >= budget:
            break

    logger.debug("sampled rows/columns covering %d coordinates for a budget of %d", realized, budget)
    return {
        matrices[i].name: CoordinateMask(matrices[i].shape, picks[i].indices())
        for i in sorted(picks)
        if picks[i].rows or picks[i].cols
    }

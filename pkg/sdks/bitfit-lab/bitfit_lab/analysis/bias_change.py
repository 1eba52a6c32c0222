# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""How far each encoder bias vector moved during fine-tuning

The change of a bias vector is the mean absolute difference between its initial and fine-tuned values,
`||b_0 - b_F||_1 / dim(b)`. A report holds one such value per (bias type, layer).
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from bitfit_lab.params.naming import BiasType, parse_layer_param
from bitfit_lab.params.store import ParamSnapshot

from .exceptions import ReportMismatchError

logger = logging.getLogger(__name__)

BIAS_TYPES: Tuple[BiasType, ...] = tuple(BiasType)


def mean_abs_change(initial: np.ndarray, final: np.ndarray) -> float:
    initial = np.asarray(initial, dtype=np.float64)
    final = np.asarray(final, dtype=np.float64)
    if initial.shape != final.shape:
        raise ReportMismatchError(f"cannot compare shapes {initial.shape} and {final.shape}")
    if initial.size == 0:
        raise ReportMismatchError("cannot measure the change of an empty vector")
    return float(np.abs(initial - final).mean())


@dataclass
class BiasChangeReport:
    """[8 x L] matrix of bias changes, rows in `BIAS_TYPES` order, column i for encoder layer i

    :param base_id: digest of the initial snapshot
    :param final_id: digest of the fine-tuned snapshot, or several joined by "+" for averaged reports
    """

    matrix: np.ndarray
    base_id: str = ""
    final_id: str = ""

    @property
    def num_layers(self) -> int:
        return self.matrix.shape[1]

    @property
    def labels(self) -> List[str]:
        return [b.value for b in BIAS_TYPES]

    def row(self, bias: BiasType) -> np.ndarray:
        return self.matrix[BIAS_TYPES.index(BiasType(bias))]

    def value(self, bias: BiasType, layer: int) -> float:
        return float(self.row(bias)[layer])


def _layer_biases(snap: ParamSnapshot) -> dict:
    by_suffix = {b.suffix: b for b in BIAS_TYPES}
    found = {}
    for name in snap.names():
        parsed = parse_layer_param(name)
        if parsed is None or parsed[1] not in by_suffix:
            continue
        found[(by_suffix[parsed[1]], parsed[0])] = name
    return found


def bias_change(initial: ParamSnapshot, final: ParamSnapshot) -> BiasChangeReport:
    """Change of every encoder-layer bias between two snapshots; other entries are ignored

    :raises: ReportMismatchError when the snapshots disagree on bias names or shapes
    """
    names = _layer_biases(initial)
    final_names = _layer_biases(final)
    if set(names) != set(final_names):
        missing = sorted(final_names.get(k) or names[k] for k in set(names) ^ set(final_names))
        raise ReportMismatchError(f"bias entries present in only one snapshot: {', '.join(missing)}")
    if not names:
        raise ReportMismatchError("snapshots hold no encoder-layer bias")

    num_layers = max(layer for _, layer in names) + 1
    matrix = np.zeros((len(BIAS_TYPES), num_layers))
    for (bias, layer), name in names.items():
        if initial[name].shape != final[name].shape:
            raise ReportMismatchError(f"{name}: shape {initial[name].shape} differs from {final[name].shape}")
        matrix[BIAS_TYPES.index(bias), layer] = mean_abs_change(initial[name], final[name])
    return BiasChangeReport(matrix, base_id=initial.digest(), final_id=final.digest())


def mean_bias_change(reports: Sequence[BiasChangeReport], final_id: Optional[str] = None) -> BiasChangeReport:
    """Elementwise mean of reports measured from the same base, e.g. the seeds of one run"""
    if not reports:
        raise ReportMismatchError("no report to average")
    shape = reports[0].matrix.shape
    for report in reports[1:]:
        if report.matrix.shape != shape:
            raise ReportMismatchError(f"report shapes differ: {shape} and {report.matrix.shape}")
        if report.base_id != reports[0].base_id:
            logger.warning("averaging bias changes measured from different initial snapshots")
    matrix = np.mean(np.stack([r.matrix for r in reports]), axis=0)
    return BiasChangeReport(
        matrix,
        base_id=reports[0].base_id,
        final_id=final_id if final_id is not None else "+".join(r.final_id for r in reports),
    )

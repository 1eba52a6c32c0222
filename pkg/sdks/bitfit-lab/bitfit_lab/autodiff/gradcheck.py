# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Tuple

import numpy as np

from .exceptions import NonDeterministicFunctionError
from .rng import RngStream
from .tensor import Tensor, backward, no_grad

if TYPE_CHECKING:
    from bitfit_lab.params.store import ParameterStore

logger = logging.getLogger(__name__)

# Denominator floor of the relative error, keeps round-off on vanishing gradients from counting as failures
ABS_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    """Outcome of a finite-difference gradient check

    :param errors: max relative error per checked parameter
    :param num_coordinates: number of coordinates perturbed
    """

    tol: float
    errors: Dict[str, float] = field(default_factory=dict)
    num_coordinates: int = 0
    worst: Optional[Tuple[str, int]] = None

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tol

    def __str__(self):
        return f"GradCheckReport(passed={self.passed}, max_error={self.max_error:.3e}, coords={self.num_coordinates})"


def relative_error(analytic: float, numeric: float, abs_floor: float = ABS_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), abs_floor)


def _sample_coordinates(
    sizes: List[Tuple[str, int]], num_samples: Optional[int], seed: int
) -> List[Tuple[str, int]]:
    everything = [(name, i) for name, size in sizes for i in range(size)]
    if num_samples is None or num_samples >= len(everything):
        return everything
    picked = RngStream(seed, "grad_check").choice(len(everything), num_samples)
    return [everything[i] for i in sorted(picked)]


def grad_check(
    f: Callable[[], Tensor],
    store: "ParameterStore",
    eps: float = 1e-5,
    tol: float = 1e-4,
    num_samples: Optional[int] = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic gradients of `f` with central differences (f(x+eps) - f(x-eps)) / 2eps

    :param f: deterministic function of the store's current values, returns a scalar loss
    :param store: parameters, every entry with requires_grad=True is checked
    :param num_samples: number of coordinates to check, sampled uniformly across all trainable
        coordinates; check every coordinate when None
    :raises: NonDeterministicFunctionError when two evaluations at the same point disagree
    """
    store.zero_grad()
    loss = f()
    backward(loss)
    base = loss.item()
    with no_grad():
        again = f().item()
    if base != again:
        raise NonDeterministicFunctionError(
            f"function returned {base!r} then {again!r} for identical inputs, disable dropout before checking"
        )

    trainable = [(name, t) for name, t in store.items() if t.requires_grad]
    analytic = {name: (t.grad if t.grad is not None else np.zeros_like(t.data)).reshape(-1) for name, t in trainable}
    coords = _sample_coordinates([(name, t.size) for name, t in trainable], num_samples, seed)

    report = GradCheckReport(tol=tol, num_coordinates=len(coords))
    tensors = dict(trainable)
    with no_grad():
        for name, i in coords:
            flat = tensors[name].data.reshape(-1)
            original = flat[i]
            flat[i] = original + eps
            plus = f().item()
            flat[i] = original - eps
            minus = f().item()
            flat[i] = original

            numeric = (plus - minus) / (2.0 * eps)
            err = relative_error(float(analytic[name][i]), numeric)
            if err > report.errors.get(name, -1.0):
                report.errors[name] = err
            if report.worst is None or err >= report.max_error:
                report.worst = (name, i)

    store.zero_grad()
    logger.debug("gradient check finished: %s", report)
    return report

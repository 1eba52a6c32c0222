# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""AdamW restricted to the trainable coordinates of a store

Moments are kept as flat arrays holding only the coordinates a resolution made trainable, so the optimizer state
of a BitFit run is as small as its bias vectors. Per coordinate, at step t:

    m <- b1 m + (1 - b1) g
    v <- b2 v + (1 - b2) g^2
    theta <- theta - lr (m / (1 - b1^t) / (sqrt(v / (1 - b2^t)) + eps) + wd theta)

with wd = 0 for the entries exempt from decay.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional

import numpy as np

from bitfit_lab.params.sampling import CoordinateMask
from bitfit_lab.params.selectors import Resolution, match_any
from bitfit_lab.params.store import ParameterStore

from .config import OptimizerConfig
from .exceptions import NonFiniteGradientError

logger = logging.getLogger(__name__)


@dataclass
class AdamWState:
    """First and second moments per trainable entry, flat and restricted to its trainable coordinates"""

    step: int = 0
    exp_avg: Dict[str, np.ndarray] = field(default_factory=dict)
    exp_avg_sq: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def num_elements(self) -> int:
        """Coordinates tracked, each holding one first and one second moment"""
        return sum(m.size for m in self.exp_avg.values())

    @classmethod
    def for_resolution(cls, resolution: Resolution) -> "AdamWState":
        state = cls()
        for name in resolution.trainable_names():
            count = resolution.coordinate_count(name)
            state.exp_avg[name] = np.zeros(count)
            state.exp_avg_sq[name] = np.zeros(count)
        return state


def adamw_step(
    store: ParameterStore,
    grads: Mapping[str, Optional[np.ndarray]],
    state: AdamWState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.01,
    masks: Optional[Mapping[str, CoordinateMask]] = None,
    noise_floor: float = 0.0,
    no_decay: Iterable[str] = (),
):
    """One update of every entry tracked by `state`, in place; other entries are never touched

    :param grads: full-shape gradient per entry, a missing or None gradient counts as zero
    :param masks: coordinate masks of partially trainable entries
    :param noise_floor: gradient coordinates with magnitude <= noise_floor are treated as exact zeros
    :param no_decay: names of entries updated without weight decay
    :raises: NonFiniteGradientError naming the first entry with a NaN or infinite gradient
    """
    masks = masks or {}
    no_decay = set(no_decay)
    state.step += 1
    bias1 = 1.0 - beta1**state.step
    bias2 = 1.0 - beta2**state.step

    for name, m in state.exp_avg.items():
        v = state.exp_avg_sq[name]
        flat = store[name].data.reshape(-1)
        indices = masks[name].indices if name in masks else None

        grad = grads.get(name)
        if grad is None:
            g = np.zeros(m.size)
        else:
            g = np.asarray(grad, dtype=np.float64).reshape(-1)
            g = g[indices] if indices is not None else g
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name, state.step)
        if noise_floor > 0.0:
            g = np.where(np.abs(g) <= noise_floor, 0.0, g)

        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / bias1
        denom = np.sqrt(v / bias2) + eps
        direction = np.divide(m_hat, denom, out=np.zeros_like(m_hat), where=denom > 0)

        theta = flat[indices] if indices is not None else flat
        decay = 0.0 if name in no_decay else weight_decay
        updated = theta - lr * (direction + decay * theta)
        if indices is not None:
            flat[indices] = updated
        else:
            flat[:] = updated


class AdamW:
    """Stateful AdamW over the `.grad` of the trainable entries of a store

    :param resolution: decides which entries and coordinates are updated
    """

    def __init__(
        self, store: ParameterStore, resolution: Resolution, lr: float, config: Optional[OptimizerConfig] = None
    ):
        self.store = store
        self.resolution = resolution
        self.lr = lr
        self.config = config or OptimizerConfig()
        self.state = AdamWState.for_resolution(resolution)
        self.no_decay = {name for name in self.state.exp_avg if match_any(name, self.config.no_decay)}

    def step(self):
        adamw_step(
            self.store,
            {name: self.store[name].grad for name in self.state.exp_avg},
            self.state,
            lr=self.lr,
            beta1=self.config.beta1,
            beta2=self.config.beta2,
            eps=self.config.eps,
            weight_decay=self.config.weight_decay,
            masks=self.resolution.masks,
            noise_floor=self.config.grad_noise_floor,
            no_decay=self.no_decay,
        )

    def zero_grad(self):
        self.store.zero_grad()

# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
from typing import List, Optional

from pydantic import BaseModel, Field, NonNegativeInt, PositiveFloat, PositiveInt, field_validator

from bitfit_lab.params.selectors import Selector, SelectorKind

from .metrics import Metric

# Learning-rate grids: bias-only runs need much larger steps than full fine-tuning
BITFIT_LEARNING_RATES = [1e-4, 4e-4, 7e-4, 1e-3]
FULL_FT_LEARNING_RATES = [1e-5, 2e-5, 3e-5, 5e-5]
DEFAULT_SEEDS = [0, 1, 2, 3, 4]


class OptimizerConfig(BaseModel):
    """AdamW hyperparameters besides the learning rate

    :param grad_noise_floor: gradient coordinates not larger than this in magnitude count as exact zeros
    :param no_decay: globs of entries exempt from weight decay
    """

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    grad_noise_floor: float = 1e-12
    no_decay: List[str] = Field(default_factory=lambda: ["*.bias", "*LayerNorm.weight"])

    @field_validator("beta1", "beta2")
    @classmethod
    def _check_beta(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError(f"betas must lie in [0, 1), got {value}")
        return value


class TrainConfig(BaseModel):
    """Fine-tuning protocol

    :param learning_rates: grid to sweep, None picks the full fine-tuning grid for the "full" selector and the
        bias grid for everything else
    :param eval_every: steps between dev evaluations, None evaluates once per epoch
    :param patience: evaluations without improvement before stopping
    :param workers: threads running (lr, seed) jobs, results never depend on it
    """

    learning_rates: Optional[List[PositiveFloat]] = None
    batch_size: PositiveInt = 16
    max_epochs: NonNegativeInt = 10
    seeds: List[NonNegativeInt] = Field(default_factory=lambda: list(DEFAULT_SEEDS))
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    selector: Selector = Field(default_factory=lambda: Selector(kind=SelectorKind.BITFIT))
    eval_every: Optional[PositiveInt] = None
    patience: PositiveInt = 3
    metric: Metric = Metric.ACCURACY
    workers: PositiveInt = 1

    @field_validator("learning_rates")
    @classmethod
    def _check_learning_rates(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and not value:
            raise ValueError("learning_rates must not be empty")
        return value

    @field_validator("seeds")
    @classmethod
    def _check_seeds(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("seeds must not be empty")
        if len(set(value)) != len(value):
            raise ValueError("seeds must be distinct")
        return value

    def lr_grid(self) -> List[float]:
        if self.learning_rates is not None:
            return sorted(self.learning_rates)
        if self.selector.kind == SelectorKind.FULL:
            return list(FULL_FT_LEARNING_RATES)
        return list(BITFIT_LEARNING_RATES)

    def with_seed_offset(self, offset: int) -> "TrainConfig":
        return self.model_copy(update={"seeds": [s + offset for s in self.seeds]})


class PretrainConfig(BaseModel):
    """Masked-LM pretraining

    :param corpus_size: training sentences
    :param heldout_size: sentences of the held-out evaluation corpus, drawn with another seed
    :param mask_rate: share of maskable positions replaced by MASK, at least one per sequence
    :param log_every: steps between loss log records
    """

    steps: NonNegativeInt = 2000
    batch_size: PositiveInt = 32
    learning_rate: PositiveFloat = 1e-3
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    corpus_size: PositiveInt = 4000
    heldout_size: PositiveInt = 200
    mask_rate: float = 0.15
    seed: NonNegativeInt = 0
    log_every: PositiveInt = 50

    @field_validator("mask_rate")
    @classmethod
    def _check_mask_rate(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError(f"mask_rate must lie in (0, 1), got {value}")
        return value

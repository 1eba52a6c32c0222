# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
from .config import (
    BITFIT_LEARNING_RATES,
    DEFAULT_SEEDS,
    FULL_FT_LEARNING_RATES,
    OptimizerConfig,
    PretrainConfig,
    TrainConfig,
)
from .metrics import Metric, accuracy, binary_f1, compute_metric, matthews_corrcoef
from .optim import AdamW, AdamWState, adamw_step
from .pretrain import MlmEvaluation, PretrainResult, evaluate_mlm, mask_tokens, pretrain_mlm
from .results import RunResult, SeedAggregate, SeedRecord, aggregate_seeds, select_best_lr
from .trainer import evaluate, predict, prepare_store, random_base, run_single, train_task

__all__ = [
    "AdamW",
    "AdamWState",
    "BITFIT_LEARNING_RATES",
    "DEFAULT_SEEDS",
    "FULL_FT_LEARNING_RATES",
    "Metric",
    "MlmEvaluation",
    "OptimizerConfig",
    "PretrainConfig",
    "PretrainResult",
    "RunResult",
    "SeedAggregate",
    "SeedRecord",
    "TrainConfig",
    "accuracy",
    "adamw_step",
    "aggregate_seeds",
    "binary_f1",
    "compute_metric",
    "evaluate",
    "evaluate_mlm",
    "mask_tokens",
    "matthews_corrcoef",
    "predict",
    "prepare_store",
    "pretrain_mlm",
    "random_base",
    "run_single",
    "select_best_lr",
    "train_task",
]

# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
import math
from dataclasses import dataclass
from typing import Dict

from bitfit_lab.training.results import RunResult, SeedAggregate, aggregate_seeds

from .exceptions import MissingMetricError


@dataclass(frozen=True)
class GeneralizationGap:
    """Train minus dev accuracy per seed, at the selected learning rate"""

    task: str
    selector: str
    per_seed: Dict[int, float]
    summary: SeedAggregate

    @property
    def mean(self) -> float:
        return self.summary.mean


def generalization_gap(run: RunResult) -> GeneralizationGap:
    """:raises: MissingMetricError when a seed lacks train or dev accuracy"""
    per_seed = {}
    for record in run.best_records:
        train = getattr(record, "train_accuracy", None)
        dev = getattr(record, "dev_accuracy", None)
        if train is None or dev is None or math.isnan(train) or math.isnan(dev):
            raise MissingMetricError(f"{run.task}/{run.selector} seed {record.seed}: train or dev accuracy missing")
        per_seed[record.seed] = train - dev
    if not per_seed:
        raise MissingMetricError(f"{run.task}/{run.selector}: no record at learning rate {run.best_lr:g}")
    return GeneralizationGap(run.task, run.selector_name, per_seed, aggregate_seeds(per_seed.values()))

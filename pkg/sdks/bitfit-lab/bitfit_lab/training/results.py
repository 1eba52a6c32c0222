# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Run records and their multi-seed aggregation

A run record is the JSON form of one (lr, seed) fine-tuning job:

    {"task": ..., "selector": ..., "lr": ..., "seed": ..., "metrics": {...}, "param_fraction": ...}
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from bitfit_lab.params.counting import ParamCount
from bitfit_lab.params.store import ParamSnapshot

logger = logging.getLogger(__name__)

RUN_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SeedAggregate:
    """Mean and sample standard deviation over seeds, `single_seed` marks an undefined spread"""

    mean: float
    std: float
    n: int

    @property
    def single_seed(self) -> bool:
        return self.n == 1

    def format(self, scale: float = 100.0, decimals: int = 1) -> str:
        return f"{self.mean * scale:.{decimals}f}±{self.std * scale:.{decimals}f}"


def aggregate_seeds(values: Iterable[float]) -> SeedAggregate:
    """Mean ± sample standard deviation (n - 1 denominator), std is 0 for a single seed

    :raises: ValueError for an empty input
    """
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("aggregate_seeds needs at least one value")
    if arr.size == 1:
        logger.warning("only one seed, standard deviation reported as 0")
        return SeedAggregate(float(arr[0]), 0.0, 1)
    return SeedAggregate(float(arr.mean()), float(arr.std(ddof=1)), int(arr.size))


@dataclass
class SeedRecord:
    """Outcome of one (lr, seed) job, metrics measured on the restored best parameters

    :param best_step: step of the best dev evaluation, 0 means the initial parameters won
    :param epochs_to_converge: epochs completed at `best_step`
    :param loss_curve: training loss of every step
    :param dev_curve: (step, dev metric) of every evaluation
    """

    seed: int
    lr: float
    dev_metric: float
    train_metric: float
    dev_accuracy: float
    train_accuracy: float
    best_step: int
    epochs_to_converge: float
    steps: int
    stopped_early: bool = False
    loss_curve: List[float] = field(default_factory=list)
    dev_curve: List[List[float]] = field(default_factory=list)


@dataclass
class RunResult:
    """All jobs of one (task, selector) pair and the selected learning rate

    :param final_states: fine-tuned parameters per seed at the best learning rate, never serialized
    :param base_digest: digest of the encoder snapshot every job started from
    """

    task: str
    selector: str
    selector_name: str
    metric: str
    best_lr: float
    param_count: ParamCount
    records: List[SeedRecord]
    lr_means: Dict[float, float] = field(default_factory=dict)
    base_digest: str = ""
    final_states: Dict[int, ParamSnapshot] = field(default_factory=dict, repr=False)

    @property
    def param_fraction(self) -> float:
        return self.param_count.fraction

    @property
    def best_records(self) -> List[SeedRecord]:
        return sorted((r for r in self.records if r.lr == self.best_lr), key=lambda r: r.seed)

    def aggregate(self, attr: str = "dev_metric") -> SeedAggregate:
        return aggregate_seeds(getattr(r, attr) for r in self.best_records)

    def run_records(self) -> List[dict]:
        """One JSON record per job, ordered by (lr, seed)"""
        return [
            {
                "task": self.task,
                "selector": self.selector,
                "lr": r.lr,
                "seed": r.seed,
                "metrics": {
                    self.metric: r.dev_metric,
                    "dev_metric": r.dev_metric,
                    "train_metric": r.train_metric,
                    "dev_accuracy": r.dev_accuracy,
                    "train_accuracy": r.train_accuracy,
                    "best_step": r.best_step,
                    "epochs_to_converge": r.epochs_to_converge,
                    "steps": r.steps,
                },
                "param_fraction": self.param_fraction,
            }
            for r in sorted(self.records, key=lambda r: (r.lr, r.seed))
        ]

    def to_json(self) -> dict:
        summary = self.aggregate()
        return {
            "schema_version": RUN_SCHEMA_VERSION,
            "task": self.task,
            "selector": self.selector,
            "selector_name": self.selector_name,
            "metric": self.metric,
            "best_lr": self.best_lr,
            "lr_means": [[lr, mean] for lr, mean in sorted(self.lr_means.items())],
            "param_count": {"trainable": self.param_count.trainable, "total": self.param_count.total},
            "base_digest": self.base_digest,
            "summary": {"mean": summary.mean, "std": summary.std, "n": summary.n},
            "seeds": [asdict(r) for r in sorted(self.records, key=lambda r: (r.lr, r.seed))],
            "records": self.run_records(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "RunResult":
        if data.get("schema_version") != RUN_SCHEMA_VERSION:
            raise ValueError(f"unsupported run schema version {data.get('schema_version')!r}")
        return cls(
            task=data["task"],
            selector=data["selector"],
            selector_name=data["selector_name"],
            metric=data["metric"],
            best_lr=data["best_lr"],
            param_count=ParamCount(**data["param_count"]),
            records=[SeedRecord(**r) for r in data["seeds"]],
            lr_means={lr: mean for lr, mean in data["lr_means"]},
            base_digest=data.get("base_digest", ""),
        )


def select_best_lr(lr_means: Dict[float, float]) -> float:
    """Learning rate with the highest mean dev metric, ties go to the smaller rate"""
    best: Optional[float] = None
    for lr in sorted(lr_means):
        if best is None or lr_means[lr] > lr_means[best]:
            best = lr
    if best is None:
        raise ValueError("no learning rate to select from")
    return best


def lr_means_of(records: Sequence[SeedRecord]) -> Dict[float, float]:
    grouped: Dict[float, List[float]] = {}
    for r in records:
        grouped.setdefault(r.lr, []).append(r.dev_metric)
    means = {lr: float(np.mean(vals)) for lr, vals in grouped.items()}
    if any(math.isnan(m) for m in means.values()):
        raise ValueError("NaN dev metric in run records")
    return means

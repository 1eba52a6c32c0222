# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Dev metric as a function of training-set size, for BitFit against full fine-tuning

All sizes draw their subset from one permutation seeded by `subset_seed`, so every smaller train set is
contained in every larger one. The subsets are shared by all training seeds: a seed only changes the
task-head initialization, the batch order and dropout, never which examples a point trains on.
"""
import csv
import logging
from dataclasses import asdict, dataclass, field
from os import PathLike
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from bitfit_lab.encoder.config import ModelConfig  # noqa: E402
from bitfit_lab.params.selectors import Selector  # noqa: E402
from bitfit_lab.params.store import ParamSnapshot  # noqa: E402
from bitfit_lab.tasks.datasets import TaskDataset, subset  # noqa: E402
from bitfit_lab.training.config import TrainConfig  # noqa: E402
from bitfit_lab.training.trainer import train_task  # noqa: E402

from .heatmap import SVG_HASH_SALT, format_float  # noqa: E402

logger = logging.getLogger(__name__)

SWEEP_SCHEMA_VERSION = 1
SWEEP_CSV_SCHEMA = "size_sweep/v1"
MIN_SEEDS_PER_POINT = 3
# Sweep method name -> selector text
SWEEP_METHODS: Dict[str, str] = {"bitfit": "bitfit", "full_ft": "full"}


@dataclass(frozen=True)
class SweepPoint:
    train_size: int
    method: str
    mean: float
    std: float
    n: int
    best_lr: float
    per_seed: List[float] = field(default_factory=list)


@dataclass
class SweepResult:
    task: str
    metric: str
    subset_seed: int
    points: List[SweepPoint] = field(default_factory=list)

    @property
    def sizes(self) -> List[int]:
        return sorted({p.train_size for p in self.points})

    @property
    def methods(self) -> List[str]:
        return list(dict.fromkeys(p.method for p in self.points))

    def curve(self, method: str) -> List[SweepPoint]:
        return sorted((p for p in self.points if p.method == method), key=lambda p: p.train_size)

    def to_json(self) -> dict:
        return {
            "schema_version": SWEEP_SCHEMA_VERSION,
            "task": self.task,
            "metric": self.metric,
            "subset_seed": self.subset_seed,
            "points": [asdict(p) for p in self.points],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SweepResult":
        if data.get("schema_version") != SWEEP_SCHEMA_VERSION:
            raise ValueError(f"unsupported sweep schema version {data.get('schema_version')!r}")
        return cls(
            task=data["task"],
            metric=data["metric"],
            subset_seed=data["subset_seed"],
            points=[SweepPoint(**p) for p in data["points"]],
        )


def _method_selector(method: str) -> Selector:
    return Selector.parse(SWEEP_METHODS.get(method, method))


def size_sweep(
    model: ModelConfig,
    base: ParamSnapshot,
    dataset: TaskDataset,
    sizes: Sequence[int],
    cfg: TrainConfig,
    methods: Sequence[str] = ("bitfit", "full_ft"),
    subset_seed: int = 0,
    task_name: str = "task",
) -> SweepResult:
    """Fine-tune every method on nested train subsets of the given sizes

    :param sizes: strictly increasing, the largest at most the train-set size
    :param methods: sweep method names of `SWEEP_METHODS`, or selector texts
    :raises: SubsetSizeError, ValueError for unordered sizes
    """
    sizes = list(sizes)
    if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"sweep sizes must be non-empty and strictly increasing, got {sizes}")
    if len(cfg.seeds) < MIN_SEEDS_PER_POINT:
        logger.warning("size sweep with %d seeds per point, at least %d advised", len(cfg.seeds), MIN_SEEDS_PER_POINT)

    result = SweepResult(task=task_name, metric=cfg.metric.value, subset_seed=subset_seed)
    for size in sizes:
        data = subset(dataset, size, subset_seed)
        for method in methods:
            method_cfg = cfg.model_copy(update={"selector": _method_selector(method)})
            run = train_task(model, base, data, method_cfg, task_name)
            summary = run.aggregate()
            result.points.append(
                SweepPoint(
                    train_size=size,
                    method=method,
                    mean=summary.mean,
                    std=summary.std,
                    n=summary.n,
                    best_lr=run.best_lr,
                    per_seed=[r.dev_metric for r in run.best_records],
                )
            )
            logger.info("sweep %s size %d %s: %.4f ± %.4f", task_name, size, method, summary.mean, summary.std)
    return result


def write_sweep_csv(sweep: SweepResult, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fp:
        fp.write(f"# schema={SWEEP_CSV_SCHEMA} task={sweep.task} metric={sweep.metric}\n")
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["train_size", "method", "mean", "std", "n", "best_lr"])
        for method in sweep.methods:
            for p in sweep.curve(method):
                writer.writerow(
                    [p.train_size, p.method, format_float(p.mean), format_float(p.std), p.n, repr(p.best_lr)]
                )
    return path


def render_sweep_svg(sweep: SweepResult, path: PathLike, title: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for method in sweep.methods:
            curve = sweep.curve(method)
            ax.errorbar(
                [p.train_size for p in curve],
                [p.mean for p in curve],
                yerr=[p.std for p in curve],
                marker="o",
                capsize=3,
                label=method,
            )
        ax.set_xscale("log")
        ax.set_xlabel("training examples")
        ax.set_ylabel(f"dev {sweep.metric}")
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best")
        ax.set_title(title or sweep.task)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path

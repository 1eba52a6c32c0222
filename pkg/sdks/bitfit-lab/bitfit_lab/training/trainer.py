# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Fine-tuning protocol: a grid of (learning rate, seed) jobs, early stopping on the dev metric, best-LR selection

Every job derives its randomness from its seed alone: head initialisation from the "init" stream, batch order
from "data" and dropout from "dropout". Jobs share nothing mutable, so they may run on a thread pool and are
reduced in (lr, seed) order.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from bitfit_lab.autodiff import RngStream, Tensor, backward, cross_entropy, no_grad
from bitfit_lab.encoder.config import ModelConfig
from bitfit_lab.encoder.model import HeadKind, attach_head, classifier_logits, init_parameters, tagger_logits
from bitfit_lab.params.counting import count_resolution
from bitfit_lab.params.naming import PRETRAINING_ONLY_PREFIX
from bitfit_lab.params.selectors import Resolution, resolve
from bitfit_lab.params.store import ParameterStore, ParamSnapshot
from bitfit_lab.tasks.datasets import IGNORE_INDEX, Split, TaskDataset

from .config import TrainConfig
from .exceptions import DivergenceError, EmptyDatasetError, NonFiniteMetricError
from .metrics import accuracy, compute_metric
from .optim import AdamW
from .results import RunResult, SeedRecord, lr_means_of, select_best_lr

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 256


def head_config(model: ModelConfig, dataset: TaskDataset) -> ModelConfig:
    """Model config whose head sizes match the dataset's labels"""
    return model.model_copy(update={"num_classes": dataset.num_labels, "num_tags": dataset.num_labels})


def head_kind(dataset: TaskDataset) -> HeadKind:
    return HeadKind.TAGGER if dataset.is_tagging else HeadKind.CLASSIFIER


def random_base(model: ModelConfig, seed: int = 0) -> ParamSnapshot:
    """Encoder parameters of an untrained model, the no-pretraining baseline"""
    return init_parameters(model, RngStream(seed, "init")).snapshot()


def prepare_store(base: ParamSnapshot, model: ModelConfig, dataset: TaskDataset, seed: int) -> ParameterStore:
    """Encoder from `base` (pretraining-only entries dropped) plus a head initialised from the seed"""
    store = ParameterStore.from_snapshot(base).filter(lambda name: not name.startswith(PRETRAINING_ONLY_PREFIX))
    return attach_head(store, head_config(model, dataset), head_kind(dataset), RngStream(seed, "init"))


def task_logits(
    store: ParameterStore,
    model: ModelConfig,
    dataset: TaskDataset,
    split: Split,
    training: bool = False,
    rng: Optional[RngStream] = None,
) -> Tensor:
    if dataset.is_tagging:
        return tagger_logits(split.tokens, store, model, training=training, rng=rng, segments=split.segments)
    return classifier_logits(split.tokens, store, model, training=training, rng=rng, segments=split.segments)


def task_loss(
    store: ParameterStore,
    model: ModelConfig,
    dataset: TaskDataset,
    split: Split,
    training: bool = False,
    rng: Optional[RngStream] = None,
) -> Tensor:
    logits = task_logits(store, model, dataset, split, training=training, rng=rng)
    if dataset.is_tagging:
        num_tags = logits.shape[-1]
        return cross_entropy(logits.reshape(-1, num_tags), split.labels.reshape(-1), ignore_index=IGNORE_INDEX)
    return cross_entropy(logits, split.labels)


def predict(store: ParameterStore, model: ModelConfig, dataset: TaskDataset, split: Split) -> np.ndarray:
    """Argmax predictions in eval mode, [N] or [N, n] for tagging

    :raises: NonFiniteMetricError when the logits are not finite
    """
    outputs = []
    with no_grad():
        for start in range(0, len(split), EVAL_BATCH_SIZE):
            batch = split.take(np.arange(start, min(start + EVAL_BATCH_SIZE, len(split))))
            logits = task_logits(store, model, dataset, batch).data
            if not np.all(np.isfinite(logits)):
                raise NonFiniteMetricError("model produced non-finite logits, the dev metric is undefined")
            outputs.append(np.argmax(logits, axis=-1))
    return np.concatenate(outputs, axis=0)


@dataclass
class Evaluation:
    metric: float
    accuracy: float


def evaluate(store: ParameterStore, model: ModelConfig, dataset: TaskDataset, split: Split, metric) -> Evaluation:
    preds = predict(store, model, dataset, split)
    ignore = IGNORE_INDEX if dataset.is_tagging else None
    value = compute_metric(metric, preds, split.labels, ignore_index=ignore)
    if math.isnan(value):
        raise NonFiniteMetricError(f"{metric} evaluated to NaN")
    return Evaluation(value, accuracy(preds, split.labels, ignore_index=ignore))


def run_single(
    model: ModelConfig, base: ParamSnapshot, dataset: TaskDataset, cfg: TrainConfig, lr: float, seed: int
) -> Tuple[SeedRecord, ParamSnapshot]:
    """Train one (lr, seed) job and return its record and the restored best parameters

    :raises: DivergenceError when the training loss stops being finite
    """
    model = head_config(model, dataset)
    store = prepare_store(base, model, dataset, seed)
    resolution = resolve(cfg.selector, store)
    store.set_trainable(resolution.trainable)
    optimizer = AdamW(store, resolution, lr, cfg.optimizer)
    data_rng = RngStream(seed, "data")
    dropout_rng = RngStream(seed, "dropout")

    n = len(dataset.train)
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    eval_every = cfg.eval_every or steps_per_epoch

    best = evaluate(store, model, dataset, dataset.dev, cfg.metric)
    best_state, best_step, best_epoch = store.snapshot(), 0, 0.0
    dev_curve = [[0.0, best.metric]]
    losses: List[float] = []
    bad_evals, step, stopped = 0, 0, False

    for epoch in range(cfg.max_epochs):
        order = data_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = dataset.train.take(np.sort(order[start : start + cfg.batch_size]))
            loss = task_loss(store, model, dataset, batch, training=True, rng=dropout_rng)
            value = loss.item()
            if not math.isfinite(value):
                raise DivergenceError(lr, step, f"loss is {value}")
            backward(loss)
            optimizer.step()
            optimizer.zero_grad()
            step += 1
            losses.append(value)

            if step % eval_every:
                continue
            current = evaluate(store, model, dataset, dataset.dev, cfg.metric)
            dev_curve.append([float(step), current.metric])
            logger.debug("lr=%g seed=%d step=%d loss=%.4f dev=%.4f", lr, seed, step, value, current.metric)
            if current.metric > best.metric:
                best, best_state, best_step, bad_evals = current, store.snapshot(), step, 0
                best_epoch = step / steps_per_epoch
            else:
                bad_evals += 1
                if bad_evals >= cfg.patience:
                    stopped = True
                    break
        if stopped:
            break

    store.restore(best_state)
    train_eval = evaluate(store, model, dataset, dataset.train, cfg.metric)
    record = SeedRecord(
        seed=seed,
        lr=lr,
        dev_metric=best.metric,
        train_metric=train_eval.metric,
        dev_accuracy=best.accuracy,
        train_accuracy=train_eval.accuracy,
        best_step=best_step,
        epochs_to_converge=best_epoch,
        steps=step,
        stopped_early=stopped,
        loss_curve=losses,
        dev_curve=dev_curve,
    )
    return record, best_state


def train_task(
    model: ModelConfig, base: ParamSnapshot, dataset: TaskDataset, cfg: TrainConfig, task_name: str = "task"
) -> RunResult:
    """Run every (lr, seed) job of the grid, select the best learning rate and report its seeds

    :param base: encoder parameters to start from, a pretrained checkpoint or `random_base`
    :raises: EmptyDatasetError, NonFiniteMetricError, DivergenceError
    """
    if len(dataset.train) == 0 or len(dataset.dev) == 0:
        raise EmptyDatasetError("both train and dev splits need examples")

    jobs = [(lr, seed) for lr in cfg.lr_grid() for seed in cfg.seeds]
    logger.info(
        "training %s with %s: %d learning rates x %d seeds",
        task_name,
        cfg.selector.display_name,
        len(cfg.lr_grid()),
        len(cfg.seeds),
    )
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(lambda job: run_single(model, base, dataset, cfg, *job), jobs))
    else:
        outcomes = [run_single(model, base, dataset, cfg, lr, seed) for lr, seed in jobs]

    results: Dict[Tuple[float, int], Tuple[SeedRecord, ParamSnapshot]] = dict(zip(jobs, outcomes))
    records = [results[job][0] for job in sorted(results)]
    lr_means = lr_means_of(records)
    best_lr = select_best_lr(lr_means)

    resolution = _resolution_for(model, base, dataset, cfg)
    result = RunResult(
        task=task_name,
        selector=cfg.selector.to_text(),
        selector_name=cfg.selector.display_name,
        metric=cfg.metric.value,
        best_lr=best_lr,
        param_count=count_resolution(resolution),
        records=records,
        lr_means=lr_means,
        base_digest=base.digest(),
        final_states={seed: results[(best_lr, seed)][1] for seed in sorted(cfg.seeds)},
    )
    summary = result.aggregate()
    logger.info(
        "%s / %s: best lr %g, dev %s %.4f ± %.4f", task_name, result.selector_name, best_lr, result.metric,
        summary.mean, summary.std,
    )
    return result


def _resolution_for(model: ModelConfig, base: ParamSnapshot, dataset: TaskDataset, cfg: TrainConfig) -> Resolution:
    store = prepare_store(base, head_config(model, dataset), dataset, cfg.seeds[0])
    return resolve(cfg.selector, store)

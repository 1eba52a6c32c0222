# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Masked-language-model pretraining on the synthetic corpus"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from bitfit_lab.autodiff import RngStream, backward, no_grad
from bitfit_lab.encoder.config import NUM_RESERVED_TOKENS, ModelConfig
from bitfit_lab.encoder.model import init_parameters, mlm_logits, mlm_loss
from bitfit_lab.params.selectors import Selector, SelectorKind, resolve
from bitfit_lab.params.store import ParamSnapshot
from bitfit_lab.tasks.grammar import SyntheticCorpus

from .config import PretrainConfig
from .exceptions import DivergenceError, EmptyDatasetError
from .optim import AdamW

logger = logging.getLogger(__name__)


def mask_tokens(tokens: np.ndarray, rng: RngStream, rate: float) -> np.ndarray:
    """Boolean mask over [B, n] tokens, reserved tokens are never masked

    Every row with a maskable position gets at least one masked position.
    """
    tokens = np.atleast_2d(tokens)
    maskable = tokens >= NUM_RESERVED_TOKENS
    draws = rng.random(tokens.shape)
    mask = (draws < rate) & maskable
    # Rows left empty take their maskable position with the smallest draw
    for row in np.flatnonzero(~mask.any(axis=1) & maskable.any(axis=1)):
        candidates = np.where(maskable[row], draws[row], np.inf)
        mask[row, int(np.argmin(candidates))] = True
    return mask


@dataclass(frozen=True)
class MlmEvaluation:
    loss: float
    accuracy: float
    num_masked: int


def evaluate_mlm(
    store, model: ModelConfig, sequences: np.ndarray, mask: np.ndarray, batch_size: int = 256
) -> MlmEvaluation:
    """Mean masked-token cross-entropy and accuracy under a fixed mask, in eval mode"""
    total_loss, correct, count = 0.0, 0, 0
    with no_grad():
        for start in range(0, len(sequences), batch_size):
            rows = slice(start, start + batch_size)
            if not mask[rows].any():
                continue
            logits, targets = mlm_logits(sequences[rows], mask[rows], store, model)
            data = logits.data
            shifted = data - data.max(axis=-1, keepdims=True)
            log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
            total_loss -= float(log_probs[np.arange(len(targets)), targets].sum())
            correct += int((np.argmax(data, axis=-1) == targets).sum())
            count += len(targets)
    if count == 0:
        raise EmptyDatasetError("held-out corpus has no maskable position")
    return MlmEvaluation(total_loss / count, correct / count, count)


@dataclass
class PretrainResult:
    """Pretrained parameters and the trajectory that produced them

    :param losses: training loss of every step
    :param log: mean training loss over every `log_every` window
    """

    snapshot: ParamSnapshot
    losses: List[float] = field(default_factory=list)
    log: List[dict] = field(default_factory=list)
    initial_heldout: Optional[MlmEvaluation] = None
    final_heldout: Optional[MlmEvaluation] = None

    @property
    def final_loss(self) -> Optional[float]:
        return self.losses[-1] if self.losses else None

    def to_json(self) -> dict:
        def _eval(e: Optional[MlmEvaluation]):
            return None if e is None else {"loss": e.loss, "accuracy": e.accuracy, "num_masked": e.num_masked}

        return {
            "steps": len(self.losses),
            "final_loss": self.final_loss,
            "log": self.log,
            "heldout": {"initial": _eval(self.initial_heldout), "final": _eval(self.final_heldout)},
            "snapshot_digest": self.snapshot.digest(),
        }


def pretrain_mlm(
    model: ModelConfig, corpus: SyntheticCorpus, cfg: PretrainConfig, heldout: Optional[SyntheticCorpus] = None
) -> PretrainResult:
    """Train every encoder parameter plus the MLM output bias on masked-token prediction

    :param heldout: corpus evaluated before and after training under one fixed mask
    :raises: EmptyDatasetError, DivergenceError
    """
    if len(corpus) == 0:
        raise EmptyDatasetError("pretraining corpus is empty")
    sequences = corpus.sequences()
    store = init_parameters(model, RngStream(cfg.seed, "init"), mlm=True)
    resolution = resolve(Selector(kind=SelectorKind.FULL, always_trainable=[]), store)
    store.set_trainable(resolution.trainable)
    optimizer = AdamW(store, resolution, cfg.learning_rate, cfg.optimizer)

    heldout_sequences = heldout_mask = None
    result = PretrainResult(snapshot=store.snapshot())
    if heldout is not None:
        heldout_sequences = heldout.sequences()
        heldout_mask = mask_tokens(heldout_sequences, RngStream(cfg.seed, "heldout_mask"), cfg.mask_rate)
        result.initial_heldout = evaluate_mlm(store, model, heldout_sequences, heldout_mask)
        logger.info("held-out MLM loss before pretraining: %.4f", result.initial_heldout.loss)

    data_rng = RngStream(cfg.seed, "pretrain_data")
    mask_rng = RngStream(cfg.seed, "mask")
    dropout_rng = RngStream(cfg.seed, "dropout")
    order = np.empty(0, dtype=np.int64)
    cursor = 0
    window: List[float] = []

    for step in range(1, cfg.steps + 1):
        if cursor >= len(order):
            order, cursor = data_rng.permutation(len(sequences)), 0
        rows = np.sort(order[cursor : cursor + cfg.batch_size])
        cursor += cfg.batch_size
        batch = sequences[rows]
        mask = mask_tokens(batch, mask_rng, cfg.mask_rate)

        loss = mlm_loss(batch, mask, store, model, rng=dropout_rng, training=True)
        value = loss.item()
        if not math.isfinite(value):
            raise DivergenceError(cfg.learning_rate, step, f"MLM loss is {value}")
        backward(loss)
        optimizer.step()
        optimizer.zero_grad()
        result.losses.append(value)
        window.append(value)

        if step % cfg.log_every == 0 or step == cfg.steps:
            mean = float(np.mean(window))
            result.log.append({"step": step, "loss": mean})
            logger.debug("pretrain step %d: loss %.4f", step, mean)
            window = []

    result.snapshot = store.snapshot()
    if heldout is not None:
        result.final_heldout = evaluate_mlm(store, model, heldout_sequences, heldout_mask)
        logger.info(
            "held-out MLM loss after %d steps: %.4f, masked-token accuracy %.3f",
            cfg.steps,
            result.final_heldout.loss,
            result.final_heldout.accuracy,
        )
    return result

# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""BERT-style encoder over a ParameterStore

Each layer computes, on the layer input x:

    Q, K, V = W_q x + b_q, W_k x + b_k, W_v x + b_v, split into M heads of H / M dims
    h1 = concat over heads of softmax(Q K^T / sqrt(H / M)) V
    h2 = Dropout(W_m1 h1 + b_m1)
    h3 = LN1(h2 + x)
    h4 = GELU(W_m2 h3 + b_m2)
    h5 = Dropout(W_m3 h4 + b_m3)
    out = LN2(h5 + h3)

There is no attention mask, every batch uses a single fixed sequence length.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from bitfit_lab.autodiff import (
    RngStream,
    Tensor,
    cross_entropy,
    dropout,
    embedding,
    gelu,
    layer_norm,
    layer_norm_stats,
    matmul,
    matmul_bias,
    softmax,
)
from bitfit_lab.params import naming
from bitfit_lab.params.naming import layer_param
from bitfit_lab.params.store import ParameterStore, ParamLayout

from .config import MASK_ID, ModelConfig
from .exceptions import EmptyMaskError, SequenceLengthError, VocabularyError

logger = logging.getLogger(__name__)

TokenArray = Union[Sequence[int], Sequence[Sequence[int]], np.ndarray]


class HeadKind(str, Enum):
    CLASSIFIER = "classifier"
    TAGGER = "tagger"


@dataclass
class LayerTrace:
    """Intermediates of one layer, arrays shaped [B, n, H]; the LayerNorm statistics are [B, n, 1]"""

    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    h4: np.ndarray
    h5: np.ndarray
    out: np.ndarray
    ln1_mu: np.ndarray
    ln1_sigma: np.ndarray
    ln2_mu: np.ndarray
    ln2_sigma: np.ndarray


@dataclass
class ActivationTrace:
    """Collects intermediates when passed to `encode`, stays empty otherwise"""

    embeddings: Optional[np.ndarray] = None
    layers: List[LayerTrace] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.layers)


def _layer_shapes(cfg: ModelConfig, layer: int) -> List[Tuple[str, Tuple[int, ...]]]:
    H, F = cfg.hidden, cfg.mlp_width
    shapes = {
        "W_q": (H, H),
        "b_q": (H,),
        "W_k": (H, H),
        "b_k": (H,),
        "W_v": (H, H),
        "b_v": (H,),
        "W_m1": (H, H),
        "b_m1": (H,),
        "g_LN1": (H,),
        "b_LN1": (H,),
        "W_m2": (F, H),
        "b_m2": (F,),
        "W_m3": (H, F),
        "b_m3": (H,),
        "g_LN2": (H,),
        "b_LN2": (H,),
    }
    return [(layer_param(layer, symbol), shape) for symbol, shape in shapes.items()]


def head_shapes(cfg: ModelConfig, kind: HeadKind) -> List[Tuple[str, Tuple[int, ...]]]:
    if kind == HeadKind.CLASSIFIER:
        return [
            (naming.CLASSIFIER_WEIGHT, (cfg.num_classes, cfg.hidden)),
            (naming.CLASSIFIER_BIAS, (cfg.num_classes,)),
        ]
    return [(naming.TAGGER_WEIGHT, (cfg.num_tags, cfg.hidden)), (naming.TAGGER_BIAS, (cfg.num_tags,))]


def build_layout(cfg: ModelConfig, head: Optional[HeadKind] = None, mlm: bool = False) -> ParamLayout:
    """Names and shapes of every parameter, in store order, without allocating anything

    :param head: task head to include, none for the bare pretrained encoder
    :param mlm: include the masked-LM output bias
    """
    H = cfg.hidden
    shapes: List[Tuple[str, Tuple[int, ...]]] = [
        (naming.WORD_EMBEDDINGS, (cfg.vocab_size, H)),
        (naming.POSITION_EMBEDDINGS, (cfg.max_seq_len, H)),
        (naming.TOKEN_TYPE_EMBEDDINGS, (cfg.type_vocab_size, H)),
        (naming.EMBEDDING_LN_WEIGHT, (H,)),
        (naming.EMBEDDING_LN_BIAS, (H,)),
    ]
    for layer in range(cfg.num_layers):
        shapes.extend(_layer_shapes(cfg, layer))
    if head is not None:
        shapes.extend(head_shapes(cfg, HeadKind(head)))
    if mlm:
        shapes.append((naming.MLM_BIAS, (cfg.vocab_size,)))
    return ParamLayout.from_shapes(shapes)


def _initial_value(name: str, shape: Tuple[int, ...], rng: RngStream, std: float) -> np.ndarray:
    if name.endswith("LayerNorm.weight"):
        return np.ones(shape)
    if naming.is_bias(name):
        return np.zeros(shape)
    return rng.normal(shape, std)


def init_parameters(
    cfg: ModelConfig, rng: RngStream, head: Optional[HeadKind] = None, mlm: bool = False
) -> ParameterStore:
    """Fresh parameters: weights ~ N(0, init_std^2), biases zero, LayerNorm gains one"""
    store = ParameterStore()
    for spec in build_layout(cfg, head=head, mlm=mlm):
        store.add(spec.name, _initial_value(spec.name, spec.shape, rng, cfg.init_std))
    return store


def attach_head(store: ParameterStore, cfg: ModelConfig, kind: HeadKind, rng: RngStream) -> ParameterStore:
    """Add a freshly initialised task head to `store` in place"""
    for name, shape in head_shapes(cfg, HeadKind(kind)):
        store.add(name, _initial_value(name, shape, rng, cfg.init_std))
    return store


def _check_inputs(tokens: np.ndarray, segments: np.ndarray, cfg: ModelConfig):
    if tokens.ndim != 2:
        raise ValueError(f"tokens must be [n] or [B, n], got shape {tokens.shape}")
    if tokens.shape[1] > cfg.max_seq_len:
        raise SequenceLengthError(f"sequence length {tokens.shape[1]} exceeds max_seq_len {cfg.max_seq_len}")
    if tokens.size and (tokens.min() < 0 or tokens.max() >= cfg.vocab_size):
        raise VocabularyError(f"token ids must lie in [0, {cfg.vocab_size}), got [{tokens.min()}, {tokens.max()}]")
    if segments.shape != tokens.shape:
        raise ValueError(f"segments shape {segments.shape} differs from tokens shape {tokens.shape}")
    if segments.size and (segments.min() < 0 or segments.max() >= cfg.type_vocab_size):
        raise VocabularyError(f"segment ids must lie in [0, {cfg.type_vocab_size})")


def encode(
    tokens: TokenArray,
    store: ParameterStore,
    cfg: ModelConfig,
    training: bool = False,
    rng: Optional[RngStream] = None,
    segments: Optional[TokenArray] = None,
    trace: Optional[ActivationTrace] = None,
) -> Tensor:
    """Final-layer representations, [n, H] for a single sequence or [B, n, H] for a batch

    :param training: enable dropout, which then draws from `rng`
    :param segments: segment ids shaped like `tokens`, all zero by default
    :param trace: filled with per-layer intermediates when given
    :raises: VocabularyError, SequenceLengthError
    """
    ids = np.asarray(tokens, dtype=np.int64)
    single = ids.ndim == 1
    if single:
        ids = ids[None, :]
    seg = np.zeros_like(ids) if segments is None else np.asarray(segments, dtype=np.int64).reshape(ids.shape)
    _check_inputs(ids, seg, cfg)

    n = ids.shape[1]
    x = (
        embedding(store[naming.WORD_EMBEDDINGS], ids)
        + embedding(store[naming.POSITION_EMBEDDINGS], np.arange(n))
        + embedding(store[naming.TOKEN_TYPE_EMBEDDINGS], seg)
    )
    x = layer_norm(x, store[naming.EMBEDDING_LN_WEIGHT], store[naming.EMBEDDING_LN_BIAS], cfg.layer_norm_eps)
    if trace is not None:
        trace.embeddings = x.data.copy()

    for layer in range(cfg.num_layers):
        x = encoder_layer(x, store, cfg, layer, training=training, rng=rng, trace=trace)
    return x[0] if single else x


def encoder_layer(
    x: Tensor,
    store: ParameterStore,
    cfg: ModelConfig,
    layer: int,
    training: bool = False,
    rng: Optional[RngStream] = None,
    trace: Optional[ActivationTrace] = None,
) -> Tensor:
    """One layer on a [B, n, H] input"""

    def p(symbol: str) -> Tensor:
        return store[layer_param(layer, symbol)]

    B, n, H = x.shape
    M, dh = cfg.num_heads, cfg.head_dim

    def split_heads(t: Tensor) -> Tensor:
        return t.reshape(B, n, M, dh).transpose(0, 2, 1, 3)

    q = split_heads(matmul_bias(x, p("W_q"), p("b_q")))
    k = split_heads(matmul_bias(x, p("W_k"), p("b_k")))
    v = split_heads(matmul_bias(x, p("W_v"), p("b_v")))
    scores = matmul(q, k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(dh))
    context = matmul(softmax(scores, axis=-1), v)
    h1 = context.transpose(0, 2, 1, 3).reshape(B, n, H)

    h2 = dropout(matmul_bias(h1, p("W_m1"), p("b_m1")), cfg.dropout_p, rng, training)
    h3 = layer_norm(h2 + x, p("g_LN1"), p("b_LN1"), cfg.layer_norm_eps)
    h4 = gelu(matmul_bias(h3, p("W_m2"), p("b_m2")))
    h5 = dropout(matmul_bias(h4, p("W_m3"), p("b_m3")), cfg.dropout_p, rng, training)
    out = layer_norm(h5 + h3, p("g_LN2"), p("b_LN2"), cfg.layer_norm_eps)

    if trace is not None:
        ln1_mu, ln1_sigma = layer_norm_stats(h2.data + x.data, cfg.layer_norm_eps)
        ln2_mu, ln2_sigma = layer_norm_stats(h5.data + h3.data, cfg.layer_norm_eps)
        trace.layers.append(
            LayerTrace(
                h1=h1.data.copy(),
                h2=h2.data.copy(),
                h3=h3.data.copy(),
                h4=h4.data.copy(),
                h5=h5.data.copy(),
                out=out.data.copy(),
                ln1_mu=ln1_mu,
                ln1_sigma=ln1_sigma,
                ln2_mu=ln2_mu,
                ln2_sigma=ln2_sigma,
            )
        )
    return out


def _cls_vectors(reps: Tensor) -> Tensor:
    if reps.ndim == 2:
        return reps[0]
    if reps.ndim == 3:
        return reps[:, 0, :]
    raise ValueError(f"representations must be [n, H] or [B, n, H], got shape {reps.shape}")


def classify_cls(reps: Tensor, head_W: Tensor, head_b: Tensor) -> Tensor:
    """Sentence logits from the CLS position (position 0): [num_classes], or [B, num_classes] for a batch"""
    return matmul_bias(_cls_vectors(reps), head_W, head_b)


def tag_tokens(reps: Tensor, head_W: Tensor, head_b: Tensor) -> Tensor:
    """Per-position logits: [n, num_tags], or [B, n, num_tags] for a batch"""
    return matmul_bias(reps, head_W, head_b)


def classifier_logits(
    tokens: TokenArray,
    store: ParameterStore,
    cfg: ModelConfig,
    training: bool = False,
    rng: Optional[RngStream] = None,
    segments: Optional[TokenArray] = None,
) -> Tensor:
    reps = encode(tokens, store, cfg, training=training, rng=rng, segments=segments)
    return classify_cls(reps, store[naming.CLASSIFIER_WEIGHT], store[naming.CLASSIFIER_BIAS])


def tagger_logits(
    tokens: TokenArray,
    store: ParameterStore,
    cfg: ModelConfig,
    training: bool = False,
    rng: Optional[RngStream] = None,
    segments: Optional[TokenArray] = None,
) -> Tensor:
    reps = encode(tokens, store, cfg, training=training, rng=rng, segments=segments)
    return tag_tokens(reps, store[naming.TAGGER_WEIGHT], store[naming.TAGGER_BIAS])


def _as_mask(mask_positions, shape: Tuple[int, ...]) -> np.ndarray:
    positions = np.asarray(mask_positions)
    if positions.dtype == np.bool_:
        if positions.shape != shape:
            raise ValueError(f"mask shape {positions.shape} differs from tokens shape {shape}")
        return positions
    if len(shape) != 1:
        raise ValueError("index lists of masked positions are only accepted for a single sequence")
    mask = np.zeros(shape, dtype=bool)
    positions = positions.astype(np.int64).reshape(-1)
    if positions.size and (positions.min() < 0 or positions.max() >= shape[0]):
        raise IndexError(f"masked positions must lie in [0, {shape[0]})")
    mask[positions] = True
    return mask


def mlm_logits(
    tokens: TokenArray,
    mask_positions,
    store: ParameterStore,
    cfg: ModelConfig,
    training: bool = False,
    rng: Optional[RngStream] = None,
) -> Tuple[Tensor, np.ndarray]:
    """Vocabulary logits [k, vocab_size] at the k masked positions, plus the original tokens there

    Masked positions are replaced by the MASK token, the output projection is tied to the word embeddings.

    :raises: EmptyMaskError
    """
    ids = np.asarray(tokens, dtype=np.int64)
    mask = _as_mask(mask_positions, ids.shape)
    if not mask.any():
        raise EmptyMaskError("mlm_loss needs at least one masked position")

    inputs = ids.copy()
    inputs[mask] = MASK_ID
    reps = encode(inputs, store, cfg, training=training, rng=rng)
    logits = matmul_bias(reps[mask], store[naming.WORD_EMBEDDINGS], store[naming.MLM_BIAS])
    return logits, ids[mask]


def mlm_loss(
    tokens: TokenArray,
    mask_positions,
    store: ParameterStore,
    cfg: ModelConfig,
    rng: Optional[RngStream] = None,
    training: bool = False,
) -> Tensor:
    """Mean cross-entropy of the original tokens at the masked positions

    :param mask_positions: boolean mask shaped like `tokens`, or positions of a single sequence
    :param rng: dropout stream, only drawn from when `training`
    """
    logits, targets = mlm_logits(tokens, mask_positions, store, cfg, training=training, rng=rng)
    return cross_entropy(logits, targets)

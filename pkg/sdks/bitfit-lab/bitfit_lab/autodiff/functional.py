# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Differentiable ops used by the encoder

GELU uses the exact form x * Phi(x) with Phi(x) = (1 + erf(x / sqrt(2))) / 2, `scipy.special.erf` provides erf.
LayerNorm uses the population variance with `LAYER_NORM_EPS` added inside the square root.
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erf

from .exceptions import DegenerateNormalizationError, InvalidProbabilityError, LabelIndexError, ShapeMismatchError
from .rng import RngStream
from .tensor import Tensor

LAYER_NORM_EPS = 1e-12
SQRT_2 = np.sqrt(2.0)
INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def matmul_bias(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """Affine map over the last axis: out[..., j] = sum_k W[j, k] * x[..., k] + b[j]

    :param x: input of shape [..., d_in]
    :param W: weight of shape [d_out, d_in]
    :param b: bias of shape [d_out]
    """
    if W.ndim != 2 or x.shape[-1:] != W.shape[1:]:
        raise ShapeMismatchError("matmul_bias", x.shape, W.shape, "inner dimensions differ")
    if b.shape != W.shape[:1]:
        raise ShapeMismatchError("matmul_bias", W.shape, b.shape, "bias length differs from output dimension")

    out = x.data @ W.data.T + b.data
    d_in, d_out = W.shape[1], W.shape[0]

    def _backward(g: np.ndarray):
        flat_g = g.reshape(-1, d_out)
        grad_x = (g @ W.data) if x.requires_grad else None
        grad_w = flat_g.T @ x.data.reshape(-1, d_in) if W.requires_grad else None
        grad_b = flat_g.sum(axis=0) if b.requires_grad else None
        return grad_x, grad_w, grad_b

    return Tensor.from_op(out, (x, W, b), _backward)


def softmax(logits: Tensor, axis: int = -1) -> Tensor:
    if logits.shape[axis] < 1:
        raise ShapeMismatchError("softmax", logits.shape, (), "reduced axis is empty")
    shifted = logits.data - logits.data.max(axis=axis, keepdims=True)
    exps = np.exp(shifted)
    probs = exps / exps.sum(axis=axis, keepdims=True)

    def _backward(g: np.ndarray):
        return (probs * (g - (g * probs).sum(axis=axis, keepdims=True)),)

    return Tensor.from_op(probs, (logits,), _backward)


def gelu(x: Tensor) -> Tensor:
    cdf = 0.5 * (1.0 + erf(x.data / SQRT_2))
    out = x.data * cdf

    def _backward(g: np.ndarray):
        pdf = INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return (g * (cdf + x.data * pdf),)

    return Tensor.from_op(out, (x,), _backward)


def layer_norm_stats(data: np.ndarray, eps: float = LAYER_NORM_EPS) -> Tuple[np.ndarray, np.ndarray]:
    """Row mean and epsilon-guarded population standard deviation over the last axis (two-pass)"""
    if data.shape[-1] < 2:
        raise DegenerateNormalizationError(f"layer norm needs at least 2 features, got shape {data.shape}")
    mu = data.mean(axis=-1, keepdims=True)
    var = ((data - mu) ** 2).mean(axis=-1, keepdims=True)
    return mu, np.sqrt(var + eps)


def layer_norm(x: Tensor, g: Tensor, b: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """g * (x - mu) / sigma + b, statistics taken per row over the last axis"""
    hidden = x.shape[-1]
    if g.shape != (hidden,) or b.shape != (hidden,):
        raise ShapeMismatchError("layer_norm", x.shape, g.shape if g.shape != (hidden,) else b.shape)
    mu, sigma = layer_norm_stats(x.data, eps)
    normed = (x.data - mu) / sigma
    out = g.data * normed + b.data

    def _backward(grad: np.ndarray):
        flat = grad.reshape(-1, hidden)
        grad_g = (flat * normed.reshape(-1, hidden)).sum(axis=0) if g.requires_grad else None
        grad_b = flat.sum(axis=0) if b.requires_grad else None
        grad_x = None
        if x.requires_grad:
            d_normed = grad * g.data
            grad_x = (
                d_normed
                - d_normed.mean(axis=-1, keepdims=True)
                - normed * (d_normed * normed).mean(axis=-1, keepdims=True)
            ) / sigma
        return grad_x, grad_g, grad_b

    return Tensor.from_op(out, (x, g, b), _backward)


def dropout(x: Tensor, p: float, rng: Optional[RngStream], training: bool) -> Tensor:
    """Inverted dropout, the exact identity in eval mode or when p == 0"""
    if not 0.0 <= p < 1.0:
        raise InvalidProbabilityError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an RngStream")

    scale = 1.0 / (1.0 - p)
    keep = (rng.random(x.shape) >= p) * scale
    return Tensor.from_op(x.data * keep, (x,), lambda g: (g * keep,))


def cross_entropy(
    logits: Tensor, labels: Union[Sequence[int], np.ndarray], ignore_index: Optional[int] = None
) -> Tensor:
    """Mean negative log-likelihood of `labels` under softmax(logits)

    :param logits: shape [n, K]
    :param labels: n class indices in [0, K), entries equal to `ignore_index` are skipped
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise ShapeMismatchError("cross_entropy", logits.shape, labels.shape)

    keep = np.ones_like(labels, dtype=bool) if ignore_index is None else labels != ignore_index
    count = int(keep.sum())
    if count == 0:
        raise ValueError("cross_entropy got no labelled positions")
    num_classes = logits.shape[1]
    kept_labels = labels[keep]
    if kept_labels.min() < 0 or kept_labels.max() >= num_classes:
        raise LabelIndexError(
            f"labels must lie in [0, {num_classes}), got range [{kept_labels.min()}, {kept_labels.max()}]"
        )

    rows = np.nonzero(keep)[0]
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    loss = -log_probs[rows, kept_labels].sum() / count

    def _backward(g: np.ndarray):
        grad = np.zeros_like(logits.data)
        grad[rows] = np.exp(log_probs[rows])
        grad[rows, kept_labels] -= 1.0
        return (grad * (g / count),)

    return Tensor.from_op(np.array(loss), (logits,), _backward)


def embedding(table: Tensor, indices: np.ndarray) -> Tensor:
    """Gather rows of `table`, output shape is indices.shape + (dim,)"""
    indices = np.asarray(indices, dtype=np.int64)
    return table[indices]

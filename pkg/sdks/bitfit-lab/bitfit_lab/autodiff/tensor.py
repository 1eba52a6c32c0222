# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Dense float64 tensors with a reverse-mode tape.

The tape is rebuilt by every forward pass: each op result keeps references to its parents and a closure that maps
the output gradient to the parents' gradients. `backward` walks the graph once in reverse topological order and
stores gradients on trainable leaves only.
"""
import threading
from contextlib import contextmanager
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import DoubleBackwardError, ShapeMismatchError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
Operand = Union["Tensor", float, int, np.ndarray]

_grad_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_grad_state, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable tape recording in the current thread"""
    previous = is_grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting"""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, size in enumerate(shape) if size == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A float64 array which may take part in gradient computation

    :param data: array-like content, always stored as a float64 array
    :param requires_grad: whether gradients should flow into this tensor
    :param name: optional label, used in diagnostics
    """

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data: np.ndarray = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._backpropagated = False

    @classmethod
    def from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], backward_fn: BackwardFn) -> "Tensor":
        """Create the result of an op, recording it on the tape when any parent needs gradients"""
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        out.grad = None
        out.name = None
        out._backpropagated = False
        out.requires_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward_fn
        else:
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # Arithmetic

    def __add__(self, other: Operand) -> "Tensor":
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Operand) -> "Tensor":
        return add(self, -_as_tensor(other))

    def __rsub__(self, other: Operand) -> "Tensor":
        return add(_as_tensor(other), -self)

    def __mul__(self, other: Operand) -> "Tensor":
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __truediv__(self, other: Union[float, int]) -> "Tensor":
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        return getitem(self, index)

    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        return reduce_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        total = reduce_sum(self, axis=axis, keepdims=keepdims)
        count = self.data.size // max(total.data.size, 1)
        return total / count

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self) -> "Tensor":
        return transpose(self, None)


def _as_tensor(value: Operand) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def add(a: Operand, b: Operand) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError:
        raise ShapeMismatchError("add", a.shape, b.shape)

    def _backward(g: np.ndarray):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return Tensor.from_op(out, (a, b), _backward)


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data * b.data
    except ValueError:
        raise ShapeMismatchError("mul", a.shape, b.shape)

    def _backward(g: np.ndarray):
        grad_a = unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        grad_b = unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return grad_a, grad_b

    return Tensor.from_op(out, (a, b), _backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the last two axes, operands must be at least 2-D"""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatchError("matmul", a.shape, b.shape)
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeMismatchError("matmul", a.shape, b.shape, "batch dimensions do not broadcast")

    def _backward(g: np.ndarray):
        grad_a = grad_b = None
        if a.requires_grad:
            grad_a = unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            grad_b = unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return grad_a, grad_b

    return Tensor.from_op(out, (a, b), _backward)


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    original = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeMismatchError("reshape", original, shape)
    return Tensor.from_op(out, (a,), lambda g: (g.reshape(original),))


def transpose(a: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return Tensor.from_op(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def getitem(a: Tensor, index) -> Tensor:
    if isinstance(index, np.ndarray) and index.dtype == np.bool_:
        index = np.nonzero(index)
    out = a.data[index]

    def _backward(g: np.ndarray):
        grad = np.zeros_like(a.data)
        np.add.at(grad, index, g)
        return (grad,)

    return Tensor.from_op(np.array(out, dtype=np.float64), (a,), _backward)


def reduce_sum(a: Tensor, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def _backward(g: np.ndarray):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor.from_op(out, (a,), _backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ValueError("concat needs at least one tensor")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeMismatchError("concat", tensors[0].shape, tensors[-1].shape)
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _backward(g: np.ndarray):
        return tuple(np.split(g, sizes, axis=axis))

    return Tensor.from_op(out, tuple(tensors), _backward)


def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor, grad: Optional[np.ndarray] = None):
    """Populate `.grad` of every trainable leaf reachable from `loss`

    :param loss: a scalar produced by a recorded forward computation
    :param grad: seed gradient, required when `loss` is not a scalar
    :raises: DoubleBackwardError when `loss` was already backpropagated or a reachable leaf still
        holds a gradient from an earlier pass
    """
    if loss._backpropagated:
        raise DoubleBackwardError("backward() was already called on this graph, run a new forward pass")
    if not loss.requires_grad:
        raise ValueError("loss does not depend on any trainable tensor")
    if grad is None:
        if loss.size != 1:
            raise ValueError(f"backward() needs a seed gradient for non-scalar output of shape {loss.shape}")
        grad = np.ones_like(loss.data)

    order = _topological_order(loss)
    for node in order:
        if node.is_leaf and node.grad is not None:
            raise DoubleBackwardError(
                f"tensor {node.name or node!r} still holds a gradient, reset gradients before a new backward pass"
            )

    grads: Dict[int, np.ndarray] = {id(loss): np.asarray(grad, dtype=np.float64)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = np.array(g, dtype=np.float64)
            continue

        assert node._backward is not None
        for parent, parent_grad in zip(node._parents, node._backward(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + parent_grad
            else:
                grads[key] = parent_grad
    loss._backpropagated = True

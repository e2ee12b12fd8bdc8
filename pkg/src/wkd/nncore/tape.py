"""Reverse-mode autodiff over a recorded tape of matrix operations.

Nodes wrap float64 numpy arrays. Each operation that touches a tensor
requiring gradients appends a closure to the output node; ``backward``
replays those closures in reverse topological order. Ops are matrix-level
(matmul, softmax over rows, reductions), not per-scalar, which keeps the
tape short even at vocabulary-sized widths.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable

import numpy as np

from ..errors import NumericError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (e.g. frozen-teacher forward)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum-reduce a gradient back to the shape it was broadcast from."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A value on the tape. Leaf tensors with requires_grad=True are parameters."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] | None = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Backpropagate from a scalar loss through the recorded tape."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        if not np.isfinite(self.data):
            raise NumericError(f"non-finite loss {float(self.data)!r}; aborting before backprop")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, astensor(other))

    def __radd__(self, other):
        return add(astensor(other), self)

    def __sub__(self, other):
        return sub(self, astensor(other))

    def __rsub__(self, other):
        return sub(astensor(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, astensor(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / float(other))
        raise TypeError("tensor division only supports python scalars")

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, astensor(other))

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]
        return scale(tsum(self, axis=axis), 1.0 / n)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def astensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward: Callable[[], None]) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


# -- primitive ops ---------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backward():
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(out.grad, b.data.shape))

    out = _node(out_data, (a, b), backward)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def backward():
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-out.grad, b.data.shape))

    out = _node(out_data, (a, b), backward)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backward():
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(out.grad * a.data, b.data.shape))

    out = _node(out_data, (a, b), backward)
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out_data = a.data * c

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad * c)

    out = _node(out_data, (a,), backward)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ out.grad)

    out = _node(out_data, (a, b), backward)
    return out


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[0] != b.data.shape[0]:
        raise ValueError(f"row mismatch in concat: {a.data.shape} vs {b.data.shape}")
    out_data = np.concatenate([a.data, b.data], axis=1)
    split = a.data.shape[1]

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad[:, :split])
        if b.requires_grad:
            b._accumulate(out.grad[:, split:])

    out = _node(out_data, (a, b), backward)
    return out


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad * out_data)

    out = _node(out_data, (a,), backward)
    return out


def log(a: Tensor) -> Tensor:
    out_data = np.log(a.data)

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad / a.data)

    out = _node(out_data, (a,), backward)
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    pos = x >= 0
    out = np.empty_like(x)
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(a: Tensor) -> Tensor:
    out_data = np.logaddexp(0.0, a.data)

    def backward():
        if a.requires_grad:
            a._accumulate(out.grad * _sigmoid(a.data))

    out = _node(out_data, (a,), backward)
    return out


def softmax_array(x: np.ndarray, temperature: float = 1.0, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax of logits/temperature along an axis."""
    if temperature <= 0:
        raise ValueError("softmax temperature must be positive")
    scaled = np.asarray(x, dtype=np.float64) / temperature
    shifted = scaled - scaled.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax(a, temperature: float = 1.0, axis: int = -1):
    """Softmax with temperature; accepts a plain array or a tape tensor."""
    if not isinstance(a, Tensor):
        return softmax_array(a, temperature=temperature, axis=axis)
    y = softmax_array(a.data, temperature=temperature, axis=axis)

    def backward():
        if a.requires_grad:
            g = out.grad
            inner = g - (g * y).sum(axis=axis, keepdims=True)
            a._accumulate(y * inner / temperature)

    out = _node(y, (a,), backward)
    return out


def log_softmax_array(x: np.ndarray, temperature: float = 1.0, axis: int = -1) -> np.ndarray:
    """Stable log-softmax of logits/temperature along an axis."""
    if temperature <= 0:
        raise ValueError("softmax temperature must be positive")
    scaled = np.asarray(x, dtype=np.float64) / temperature
    shifted = scaled - scaled.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    return shifted - lse


def log_softmax(a, temperature: float = 1.0, axis: int = -1):
    """log(softmax(x/t)) without forming the softmax; array or tape tensor."""
    if not isinstance(a, Tensor):
        return log_softmax_array(a, temperature=temperature, axis=axis)
    out_data = log_softmax_array(a.data, temperature=temperature, axis=axis)
    y = np.exp(out_data)

    def backward():
        if a.requires_grad:
            g = out.grad
            a._accumulate((g - y * g.sum(axis=axis, keepdims=True)) / temperature)

    out = _node(out_data, (a,), backward)
    return out


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward():
        if a.requires_grad:
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())

    out = _node(out_data, (a,), backward)
    return out


def zero_grads(params: Iterable[Tensor]) -> None:
    """Reset gradients so parameters unreachable from a loss read as zero."""
    for p in params:
        p.grad = np.zeros_like(p.data)

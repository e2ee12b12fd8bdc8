"""Dense, batch-norm, and dropout building blocks for the two encoders."""

from __future__ import annotations

import numpy as np

from . import tape
from .tape import Tensor


class DenseLayer:
    """Affine layer: y = x @ weight.T + bias, weight is (out, in)."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None):
        self.in_dim = in_dim
        self.out_dim = out_dim
        if rng is None:
            w = np.zeros((out_dim, in_dim))
        else:
            limit = np.sqrt(6.0 / (in_dim + out_dim))
            w = rng.uniform(-limit, limit, size=(out_dim, in_dim))
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return dense_forward(self, x)

    def named_parameters(self, prefix: str):
        return [(f"{prefix}.weight", self.weight), (f"{prefix}.bias", self.bias)]

    def n_params(self) -> int:
        return self.weight.data.size + self.bias.data.size


def dense_forward(layer: DenseLayer, x: Tensor) -> Tensor:
    x = tape.astensor(x)
    if x.data.ndim != 2 or x.data.shape[1] != layer.in_dim:
        raise ValueError(
            f"dense layer expects input width {layer.in_dim}, got shape {x.data.shape}"
        )
    w, b = layer.weight, layer.bias
    out_data = x.data @ w.data.T + b.data

    def backward():
        g = out.grad
        if w.requires_grad:
            w._accumulate(g.T @ x.data)
        if b.requires_grad:
            b._accumulate(g.sum(axis=0))
        if x.requires_grad:
            x._accumulate(g @ w.data)

    out = tape._node(out_data, (x, w, b), backward)
    return out


class BatchNormState:
    """Batch normalization with optionally frozen affine terms.

    Train mode normalizes with batch statistics and updates running stats
    (unbiased variance, torch convention); eval mode is a fixed affine map
    using the running statistics.
    """

    def __init__(
        self,
        dim: int,
        momentum: float = 0.1,
        eps: float = 1e-5,
        learn_scale: bool = True,
        learn_shift: bool = True,
    ):
        if not 0.0 < momentum < 1.0:
            raise ValueError("momentum must lie in (0, 1)")
        self.dim = dim
        self.momentum = momentum
        self.eps = eps
        self.scale = Tensor(np.ones(dim), requires_grad=learn_scale)
        self.shift = Tensor(np.zeros(dim), requires_grad=learn_shift)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)

    def __call__(self, x: Tensor, mode: str) -> Tensor:
        x = tape.astensor(x)
        if x.data.ndim != 2 or x.data.shape[1] != self.dim:
            raise ValueError(f"batchnorm expects width {self.dim}, got {x.data.shape}")
        if mode == "train":
            return self._train_forward(x)
        if mode == "eval":
            return self._eval_forward(x)
        raise ValueError(f"unknown mode {mode!r}")

    def _train_forward(self, x: Tensor) -> Tensor:
        n = x.data.shape[0]
        if n < 2:
            raise ValueError("batchnorm train mode needs batch size >= 2")
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x.data - mu) * inv_std
        out_data = self.scale.data * xhat + self.shift.data

        m = self.momentum
        self.running_mean = (1.0 - m) * self.running_mean + m * mu
        self.running_var = (1.0 - m) * self.running_var + m * var * n / (n - 1)

        scale_t, shift_t = self.scale, self.shift

        def backward():
            g = out.grad
            if scale_t.requires_grad:
                scale_t._accumulate((g * xhat).sum(axis=0))
            if shift_t.requires_grad:
                shift_t._accumulate(g.sum(axis=0))
            if x.requires_grad:
                dxhat = g * scale_t.data
                dx = (dxhat - dxhat.mean(axis=0) - xhat * (dxhat * xhat).mean(axis=0)) * inv_std
                x._accumulate(dx)

        out = tape._node(out_data, (x, scale_t, shift_t), backward)
        return out

    def _eval_forward(self, x: Tensor) -> Tensor:
        inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
        out_data = self.scale.data * (x.data - self.running_mean) * inv_std + self.shift.data
        scale_t, shift_t = self.scale, self.shift
        rm = self.running_mean.copy()

        def backward():
            g = out.grad
            if scale_t.requires_grad:
                scale_t._accumulate((g * (x.data - rm) * inv_std).sum(axis=0))
            if shift_t.requires_grad:
                shift_t._accumulate(g.sum(axis=0))
            if x.requires_grad:
                x._accumulate(g * scale_t.data * inv_std)

        out = tape._node(out_data, (x, scale_t, shift_t), backward)
        return out

    def named_parameters(self, prefix: str):
        out = []
        if self.scale.requires_grad:
            out.append((f"{prefix}.scale", self.scale))
        if self.shift.requires_grad:
            out.append((f"{prefix}.shift", self.shift))
        return out

    def named_buffers(self, prefix: str):
        out = []
        if not self.scale.requires_grad:
            out.append((f"{prefix}.scale", self.scale.data))
        if not self.shift.requires_grad:
            out.append((f"{prefix}.shift", self.shift.data))
        out.append((f"{prefix}.running_mean", self.running_mean))
        out.append((f"{prefix}.running_var", self.running_var))
        return out


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout: scales kept units by 1/(1-rate) so E[out] = in."""
    if not training or rate == 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    if rng is None:
        raise ValueError("train-mode dropout needs an rng stream")
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    return tape.mul(x, Tensor(mask))

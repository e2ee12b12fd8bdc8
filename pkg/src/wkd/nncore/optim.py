"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from ..errors import NumericError
from .tape import Tensor


class AdamState:
    """Per-parameter first/second moment accumulators plus a shared step counter.

    Defaults follow the ProdLDA lineage (lr=2e-3, beta1=0.9); everything is
    overridable through the experiment config.
    """

    def __init__(
        self,
        named_params: list[tuple[str, Tensor]],
        lr: float = 2e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.named_params = list(named_params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.named_params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.named_params}

    def step(self) -> None:
        """Apply one Adam update in place; parameters with zero grad are unchanged."""
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.named_params:
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for parameter {name!r}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self) -> None:
        for _, p in self.named_params:
            p.grad = np.zeros_like(p.data)

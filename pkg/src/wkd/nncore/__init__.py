"""Minimal differentiable compute layer: tape autodiff, dense/batchnorm/dropout
layers, softmax with temperature, Adam, and named seeded RNG streams."""

from .layers import BatchNormState, DenseLayer, dense_forward, dropout
from .optim import AdamState
from .rng import stream
from .tape import (
    Tensor,
    astensor,
    concat_cols,
    exp,
    log,
    log_softmax,
    log_softmax_array,
    no_grad,
    softmax,
    softmax_array,
    softplus,
    zero_grads,
)

__all__ = [
    "AdamState",
    "BatchNormState",
    "DenseLayer",
    "Tensor",
    "astensor",
    "concat_cols",
    "dense_forward",
    "dropout",
    "exp",
    "log",
    "log_softmax",
    "log_softmax_array",
    "no_grad",
    "softmax",
    "softmax_array",
    "softplus",
    "stream",
    "zero_grads",
]

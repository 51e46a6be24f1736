"""Minimal fp64 tensor + reverse-mode autodiff substrate."""

from .tensor import ShapeError, Tape, Tensor, as_tensor, backward, no_grad
from .ops import (
    add, concat, cross_entropy, dropout, embedding_lookup, exp, gelu, index_select,
    kl_divergence, layer_norm, log, log_softmax, matmul, mean, mul, permute, reshape,
    scale, softmax, sub, sum, tanh,
)
from .optim import LAMB, AdamW, adamw_step, lamb_step, linear_warmup_decay
from .random import derive_seed, rng

__all__ = [
    "ShapeError", "Tape", "Tensor", "as_tensor", "backward", "no_grad",
    "add", "concat", "cross_entropy", "dropout", "embedding_lookup", "exp", "gelu",
    "index_select", "kl_divergence", "layer_norm", "log", "log_softmax", "matmul", "mean",
    "mul", "permute", "reshape", "scale", "softmax", "sub", "sum", "tanh",
    "LAMB", "AdamW", "adamw_step", "lamb_step", "linear_warmup_decay",
    "derive_seed", "rng",
]

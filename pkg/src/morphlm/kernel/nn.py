"""Parameter containers.

Modules allocate parameters through an initializer object.  ``Init`` draws
real arrays; ``ShapeOnly`` records shapes without allocating, which lets the
parameter count of a full-size model be computed from the very same
constructor code that builds a trainable one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import ops
from .tensor import Tensor


@dataclass(frozen=True)
class ParamStub:
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


class Init:
    def __init__(self, rng: np.random.Generator, std: float = 0.02):
        self.rng = rng
        self.std = std

    def normal(self, shape, std: float | None = None) -> Tensor:
        s = self.std if std is None else std
        return Tensor(self.rng.normal(0.0, s, size=shape), requires_grad=True)

    def ones(self, shape) -> Tensor:
        return Tensor(np.ones(shape), requires_grad=True)

    def zeros(self, shape) -> Tensor:
        return Tensor(np.zeros(shape), requires_grad=True)


class ShapeOnly:
    def normal(self, shape, std=None) -> ParamStub:
        return ParamStub(tuple(shape))

    ones = zeros = normal


class Module:
    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, (Tensor, ParamStub)):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, (list, tuple)) and value and all(isinstance(v, Module) for v in value):
                for i, v in enumerate(value):
                    yield from v.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(int(np.prod(p.shape)) for p in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        extra = set(state) - set(own)
        if missing or extra:
            raise KeyError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for k, p in own.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"parameter {k}: shape {arr.shape} != {p.shape}")
            p.data = arr.copy()


class Linear(Module):
    def __init__(self, init, d_in: int, d_out: int, bias: bool = True):
        self.weight = init.normal((d_in, d_out))
        self.bias = init.zeros((d_out,)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = ops.matmul(x, self.weight)
        return y if self.bias is None else ops.add(y, self.bias)


class LayerNorm(Module):
    def __init__(self, init, d: int, eps: float = 1e-5):
        self.gain = init.ones((d,))
        self.bias = init.zeros((d,))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gain, self.bias, self.eps)


class Embedding(Module):
    def __init__(self, init, n: int, d: int):
        self.table = init.normal((n, d))

    def __call__(self, ids) -> Tensor:
        return ops.embedding_lookup(self.table, ids)

"""AdamW and LAMB over lists of parameter tensors."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def decay_matrices(p: Tensor) -> bool:
    """Default weight-decay filter: matrices and embedding tables only."""
    return p.ndim >= 2


class _Adam:
    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
        decay_filter: Callable[[Tensor], bool] = decay_matrices,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.decay = [weight_decay > 0 and decay_filter(p) for p in self.params]
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def _moments(self, i: int, g: np.ndarray):
        self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
        self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
        mhat = self.m[i] / (1.0 - self.beta1 ** self.t)
        vhat = self.v[i] / (1.0 - self.beta2 ** self.t)
        return mhat / (np.sqrt(vhat) + self.eps)

    def step(self, lr: float | None = None):
        lr = self.lr if lr is None else lr
        self.t += 1
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            self._update(i, p, lr)

    def _update(self, i, p, lr):  # pragma: no cover - abstract
        raise NotImplementedError

    def state_dict(self) -> dict:
        return {"t": self.t, "m": [a.copy() for a in self.m], "v": [a.copy() for a in self.v]}


class AdamW(_Adam):
    """Adam with decoupled weight decay (decay applied before the Adam step)."""

    def _update(self, i, p, lr):
        r = self._moments(i, p.grad)
        data = p.data
        if self.decay[i]:
            data = data * (1.0 - lr * self.weight_decay)
        p.data = data - lr * r


class LAMB(_Adam):
    """Layer-wise adaptive moments: the Adam direction plus decoupled decay,
    rescaled per tensor by the trust ratio ``||w|| / ||update||``."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-6, weight_decay=0.0,
                 decay_filter=decay_matrices):
        super().__init__(params, lr, betas, eps, weight_decay, decay_filter)

    def _update(self, i, p, lr):
        u = self._moments(i, p.grad)
        if self.decay[i]:
            u = u + self.weight_decay * p.data
        w_norm = float(np.linalg.norm(p.data))
        u_norm = float(np.linalg.norm(u))
        trust = w_norm / u_norm if w_norm > 0 and u_norm > 0 else 1.0
        p.data = p.data - lr * trust * u


def adamw_step(opt: AdamW, lr: float | None = None):
    opt.step(lr)


def lamb_step(opt: LAMB, lr: float | None = None):
    opt.step(lr)


def linear_warmup_decay(step: int, peak: float, warmup: int, total: int) -> float:
    """Learning rate at 0-based ``step``: linear ramp to ``peak`` then linear decay to 0."""
    if warmup > 0 and step < warmup:
        return peak * (step + 1) / warmup
    if total <= warmup:
        return peak
    remaining = max(total - step, 0)
    return peak * remaining / (total - warmup)

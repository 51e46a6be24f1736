"""Central finite-difference gradient checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .tensor import Tensor, no_grad


@dataclass
class GradCheckResult:
    name: str
    analytic: float
    numeric: float

    @property
    def rel_error(self) -> float:
        return relative_error(self.analytic, self.numeric)


def relative_error(a: float, n: float, floor: float = 1e-8) -> float:
    return abs(a - n) / max(abs(a), abs(n), floor)


def numeric_directional(loss_fn: Callable[[], Tensor], p: Tensor, direction: np.ndarray, h: float = 1e-5) -> float:
    base = p.data
    with no_grad():
        p.data = base + h * direction
        up = loss_fn().item()
        p.data = base - h * direction
        down = loss_fn().item()
    p.data = base
    return (up - down) / (2.0 * h)


def check_parameters(
    loss_fn: Callable[[], Tensor],
    params: Iterable[tuple[str, Tensor]],
    rng: np.random.Generator,
    n_elements: int = 3,
    n_directions: int = 1,
    h: float = 1e-5,
) -> list[GradCheckResult]:
    """Compare analytic gradients of every parameter against central differences.

    Each tensor is probed along ``n_directions`` random directions (covering
    all of its entries at once) and at ``n_elements`` single coordinates: the
    largest-magnitude gradient entries first, then random ones.
    """
    params = list(params)
    for _, p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    grads = {id(p): (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for _, p in params}
    results = []
    for name, p in params:
        g = grads[id(p)]
        for k in range(n_directions):
            d = rng.normal(size=p.shape)
            results.append(GradCheckResult(f"{name}[dir{k}]", float((g * d).sum()),
                                           numeric_directional(loss_fn, p, d, h)))
        flat = np.abs(g).ravel()
        picks = list(np.argsort(-flat, kind="stable")[: max(n_elements - 1, 0)])
        picks.append(int(rng.integers(flat.size)))
        for idx in dict.fromkeys(int(i) for i in picks):
            d = np.zeros(p.size)
            d[idx] = 1.0
            results.append(GradCheckResult(f"{name}[{idx}]", float(g.ravel()[idx]),
                                           numeric_directional(loss_fn, p, d.reshape(p.shape), h)))
    return results

"""Range-mapped factored emission scores."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..morphology import AgreementRuleSet, Analysis, agreement_score

DEFAULT_OUTER_EXPONENT = 8.0


@dataclass(frozen=True)
class SigmoidRange:
    z_a: float = 0.0
    z_b: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.z_a) and math.isfinite(self.z_b)) or self.z_b <= self.z_a:
            raise ValueError(f"sigmoid range needs finite z_a < z_b, got [{self.z_a}, {self.z_b}]")


@dataclass(frozen=True)
class EmissionConfig:
    m: SigmoidRange = field(default_factory=SigmoidRange)
    p: SigmoidRange = field(default_factory=SigmoidRange)
    a: SigmoidRange = field(default_factory=SigmoidRange)
    sigmoid_outer_exponent: float = DEFAULT_OUTER_EXPONENT

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "EmissionConfig":
        d = dict(d or {})
        ranges = {k: SigmoidRange(*d[k]) for k in ("m", "p", "a") if k in d}
        return cls(**ranges, sigmoid_outer_exponent=float(d.get("sigmoid_outer_exponent", DEFAULT_OUTER_EXPONENT)))

    def to_dict(self) -> dict:
        return {"m": [self.m.z_a, self.m.z_b], "p": [self.p.z_a, self.p.z_b],
                "a": [self.a.z_a, self.a.z_b], "sigmoid_outer_exponent": self.sigmoid_outer_exponent}


def log_sigma(z: float, r: SigmoidRange, outer: float = DEFAULT_OUTER_EXPONENT) -> float:
    k = 8.0 * (z - r.z_a) / (r.z_b - r.z_a)
    return -outer * float(np.logaddexp(0.0, -k))


def sigma(z: float, r: SigmoidRange, outer: float = DEFAULT_OUTER_EXPONENT) -> float:
    """[1 + exp(-8 (z - z_a) / (z_b - z_a))] ** -outer"""
    k = 8.0 * (z - r.z_a) / (r.z_b - r.z_a)
    try:
        return (1.0 + math.exp(-k)) ** -outer
    except OverflowError:
        return math.exp(log_sigma(z, r, outer))


@dataclass(frozen=True)
class EmissionEntry:
    t: int
    tag: str
    p_m: float
    p_p: float
    p_a: float
    log_mapped: float
    analysis: Analysis | None = None

    @property
    def mapped(self) -> float:
        return math.exp(self.log_mapped)


def emission(
    sentence: Sequence[Sequence[Analysis]],
    t: int,
    precedence: Mapping[str, float],
    rules: AgreementRuleSet | None = None,
    config: EmissionConfig | None = None,
) -> list[EmissionEntry]:
    """One entry per candidate tag at token ``t``; for a tag offered by several
    analyses the best-scoring analysis is kept (first one on exact ties)."""
    cfg = config or EmissionConfig()
    rules = rules or AgreementRuleSet.default()
    outer = cfg.sigmoid_outer_exponent
    best: dict[str, EmissionEntry] = {}
    for a in sentence[t]:
        p_m = a.morph_score
        p_p = float(precedence[a.pos_tag])
        p_a = agreement_score(rules, sentence, t, a)
        lm = log_sigma(p_m, cfg.m, outer) + log_sigma(p_p, cfg.p, outer) + log_sigma(p_a, cfg.a, outer)
        e = EmissionEntry(t, a.pos_tag, p_m, p_p, p_a, lm, a)
        cur = best.get(a.pos_tag)
        if cur is None or lm > cur.log_mapped:
            best[a.pos_tag] = e
    return list(best.values())


def sentence_emissions(sentence, precedence, rules=None, config=None) -> list[list[EmissionEntry]]:
    return [emission(sentence, t, precedence, rules, config) for t in range(len(sentence))]


def marginals(entries: Sequence[EmissionEntry]) -> dict[str, float]:
    """Normalized per-token tag distribution from mapped emissions."""
    lm = np.array([e.log_mapped for e in entries])
    p = np.exp(lm - lm.max())
    p /= p.sum()
    out: dict[str, float] = {}
    for e, v in zip(entries, p):
        out[e.tag] = out.get(e.tag, 0.0) + float(v)
    return out

"""Class-marker agreement within a token window."""

from __future__ import annotations

from typing import Sequence

from .analyzer import Analysis
from .grammar import AgreementRule, AgreementRuleSet


def _offsets(rule: AgreementRule, window: int) -> tuple[int, ...]:
    if rule.offsets is not None:
        return rule.offsets
    half = window // 2
    return tuple(o for o in range(-half, half + 1) if o != 0)


def _neighbor_matches(rule: AgreementRule, candidate: Analysis, neighbor: Sequence[Analysis]) -> bool:
    cand = set(candidate.class_markers)
    if rule.label is not None:
        if rule.label not in cand:
            return False
        cand = {rule.label}
    for b in neighbor:
        if rule.neighbor_tags is not None and b.pos_tag not in rule.neighbor_tags:
            continue
        if rule.same_class:
            if cand & set(b.class_markers):
                return True
        elif rule.label is None or rule.label in b.class_markers:
            return True
    return False


def rule_matches(rules: AgreementRuleSet, sentence: Sequence[Sequence[Analysis]], t: int,
                 candidate: Analysis) -> list[tuple[AgreementRule, int]]:
    """Every (rule, offset) pair that fires for ``candidate`` at position ``t``."""
    if not 0 <= t < len(sentence):
        raise IndexError(f"token index {t} outside sentence of length {len(sentence)}")
    hits = []
    for rule in rules.rules:
        if rule.candidate_tags is not None and candidate.pos_tag not in rule.candidate_tags:
            continue
        for o in _offsets(rule, rules.window):
            j = t + o
            if 0 <= j < len(sentence) and _neighbor_matches(rule, candidate, sentence[j]):
                hits.append((rule, o))
    return hits


def agreement_score(rules: AgreementRuleSet, sentence: Sequence[Sequence[Analysis]], t: int,
                    candidate: Analysis) -> float:
    """Weighted count of matched rules; the default rule scores +1 per agreeing neighbour."""
    return float(sum(rule.weight for rule, _ in rule_matches(rules, sentence, t, candidate)))

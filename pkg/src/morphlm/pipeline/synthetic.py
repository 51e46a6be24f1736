"""Seeded synthetic corpora over the toy grammar.

Each sentence is two clauses joined by a conjunction.  Within a clause the
noun, verb and adjective stems are tied to one index, and the second clause's
index is a fixed shift of the first, so any unmasked stem identifies the
others.  Noun class, tense, object marker, final vowel and locative vary
freely.  Analyses are taken from the analyzer output whose morpheme path
matches the generated one, so the corpus also exercises the analyzer.
"""

from __future__ import annotations

from ..kernel.random import rng
from ..morphology import Analysis, Grammar, analyze
from .corpus import TokenLine

CLASSES = [("umu", "a", "mu"), ("aba", "ba", "ba"), ("iki", "ki", "ki"), ("ibi", "bi", "bi")]
NOUNS = ["ntu", "ana", "gore", "arimu", "tabo", "ti", "rayi"]
VERBS = ["gend", "bon", "vug", "ger", "kor", "rim", "som"]
ADJECTIVES = ["to", "nini", "iza", "re"]
SHIFT = 3


def _word(g: Grammar, word_type: str, path: list[str]) -> Analysis:
    surface = g.generate(path, word_type)
    for a in analyze(g, surface):
        if a.word_type == word_type and list(a.morphemes) == path:
            return a
    raise AssertionError(f"analyzer did not recover {path} from {surface!r}")


def _clause(g: Grammar, r, i: int) -> list[Analysis]:
    pre, subj, adj = CLASSES[int(r.integers(len(CLASSES)))]
    out = [_word(g, "noun", [f"n_pre:{pre}", f"n_stem:{NOUNS[i]}"])]
    verb = [f"v_subj:{subj}", f"v_tense:{['ra', 'a', 'za'][int(r.integers(3))]}"]
    if r.random() < 1 / 3:
        verb.append(f"v_obj:{['mu', 'bi'][int(r.integers(2))]}")
    verb += [f"v_stem:{VERBS[i]}", f"v_final:{['a', 'ye'][int(r.integers(2))]}"]
    if r.random() < 0.25:
        verb.append("v_loc:yo")
    out.append(_word(g, "verb", verb))
    if r.random() < 0.5:
        out.append(_word(g, "adjective", [f"qa_pre:{adj}", f"qa_stem:{ADJECTIVES[i % len(ADJECTIVES)]}"]))
    return out


def synthetic_sentences(g: Grammar, n: int = 50, seed: int = 0) -> list[list[Analysis]]:
    r = rng(seed, "synthetic-corpus")
    out = []
    for _ in range(n):
        i = int(r.integers(len(NOUNS)))
        sent = _clause(g, r, i)
        sent.append(_word(g, "conjunction", ["cj_stem:na"]))
        sent += _clause(g, r, (i + SHIFT) % len(NOUNS))
        sent.append(_word(g, "punctuation", ["pt_stem:period"]))
        out.append(sent)
    return out


def as_token_lines(sentences) -> list[list[TokenLine]]:
    return [[TokenLine(a.surface, a.stem, a.pos_tag, a.affixes, 0.0) for a in s] for s in sentences]

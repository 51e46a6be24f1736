"""Analysis by guided generation.

Rather than inverting each rewrite rule symbolically, the analyzer walks the
morphotactics DAG forward, folding morphemes onto a partial surface with the
same ``join`` used by generation.  A partial surface can be discarded as soon
as its frozen prefix (everything a later boundary can no longer touch)
disagrees with the word.  Results are memoized per (word type, node, partial
surface) for the duration of one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .grammar import END, FALLBACK_TAG, START, Grammar, normalize


@dataclass(frozen=True)
class Analysis:
    surface: str
    stem: str
    affixes: tuple[str, ...]
    pos_tag: str
    morph_score: float = 0.0
    is_bpe_fallback: bool = False
    word_type: str | None = None
    n_prefixes: int = 0
    class_markers: tuple[str, ...] = ()

    def __post_init__(self):
        if self.is_bpe_fallback and self.affixes:
            raise ValueError("fallback analysis cannot carry affixes")

    @property
    def morphemes(self) -> tuple[str, ...]:
        """Full slot-ordered path: prefixes, stem, suffixes."""
        k = self.n_prefixes
        return self.affixes[:k] + (self.stem,) + self.affixes[k:]

    def key(self) -> tuple:
        return (self.word_type or "", self.morphemes)


def load_counts(path) -> dict[str, float]:
    """Read ``morpheme_id<TAB>count`` lines; blank lines and ``#`` comments are skipped."""
    counts: dict[str, float] = {}
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected morpheme_id<TAB>count")
            try:
                c = float(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: count {parts[1]!r} is not a number") from None
            if not math.isfinite(c) or c < 0:
                raise ValueError(f"{path}:{lineno}: count must be finite and >= 0")
            counts[parts[0]] = counts.get(parts[0], 0.0) + c
    return counts


def score_analysis(a: Analysis, counts: Mapping[str, float] | None = None) -> float:
    """Log-count prior: sum of ln(1 + count) over the stem and every affix."""
    if not counts:
        return 0.0
    return float(sum(math.log1p(counts.get(m, 0.0)) for m in (a.stem, *a.affixes)))


def _shrinks(g: Grammar) -> bool:
    # a boundary can shorten the pending surface only if a rule's replacement
    # is shorter than the left material it consumes
    return any(len(r.replacement) < len(r.left) for r in g.rewrite_rules)


def _paths_to(g: Grammar, word: str) -> list[tuple[str, tuple[str, ...]]]:
    lmax = g.max_left
    prune = not _shrinks(g)
    found: list[tuple[str, tuple[str, ...]]] = []

    for wt in g.word_types:
        memo: dict[tuple[str, str], list[tuple[str, ...]]] = {}

        def viable(surface: str) -> bool:
            if not prune:
                return True
            frozen = surface[: max(len(surface) - lmax, 0)]
            return word.startswith(frozen)

        def walk(node: str, surface: str) -> list[tuple[str, ...]]:
            key = (node, surface)
            if key in memo:
                return memo[key]
            out: list[tuple[str, ...]] = []
            for nxt in wt.successors(node):
                if nxt == END:
                    if surface == word:
                        out.append(())
                    continue
                for m in g.by_slot[nxt]:
                    s2 = g.join(surface, m.form) if surface else m.form
                    if not viable(s2):
                        continue
                    for tail in walk(nxt, s2):
                        out.append((m.id,) + tail)
            memo[key] = out
            return out

        for path in walk(START, ""):
            found.append((wt.name, path))
    return found


def analyze(g: Grammar, word: str, counts: Mapping[str, float] | None = None) -> list[Analysis]:
    """Every parse of ``word`` licensed by ``g``; a single fallback analysis if none."""
    surface = normalize(word)
    if not surface:
        raise ValueError("cannot analyze an empty word")
    out = []
    seen = set()
    for wname, path in _paths_to(g, surface):
        if (wname, path) in seen:
            continue
        seen.add((wname, path))
        stem, affixes, k = g.stem_of(path)
        markers = tuple(
            g.by_id[a].class_marker for a in affixes if g.by_id[a].class_marker is not None
        )
        a = Analysis(surface, stem, affixes, g.word_type(wname).pos_tag,
                     word_type=wname, n_prefixes=k, class_markers=markers)
        out.append(_with_score(a, counts))
    if not out:
        fb = Analysis(surface, surface, (), FALLBACK_TAG, is_bpe_fallback=True)
        out.append(_with_score(fb, counts))
    return out


def _with_score(a: Analysis, counts) -> Analysis:
    s = score_analysis(a, counts)
    if s == a.morph_score:
        return a
    return Analysis(a.surface, a.stem, a.affixes, a.pos_tag, s, a.is_bpe_fallback,
                    a.word_type, a.n_prefixes, a.class_markers)


def analyze_sentence(g: Grammar, words, counts=None) -> list[list[Analysis]]:
    return [analyze(g, w, counts) for w in words]

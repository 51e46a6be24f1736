"""Sentence-level tagging: analyze, score, decode."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from ..morphology import Analysis, Grammar, analyze
from .decode import Decoded, decode_bidirectional, decode_viterbi
from .emission import EmissionConfig, EmissionEntry, sentence_emissions
from .transitions import TransitionTables


@dataclass
class TagLattice:
    analyses: list[list[Analysis]]
    entries: list[list[EmissionEntry]]


class Tagger:
    def __init__(self, grammar: Grammar, counts: Mapping[str, float] | None = None,
                 config: EmissionConfig | None = None, tables: TransitionTables | None = None):
        self.grammar = grammar
        self.counts = counts or {}
        self.config = config or EmissionConfig()
        self.precedence = {t.name: t.weight for t in grammar.pos_tags}
        self.tables = tables or TransitionTables.uniform(grammar.tag_names)

    def lattice(self, words: Sequence[str]) -> TagLattice:
        analyses = [analyze(self.grammar, w, self.counts) for w in words]
        entries = sentence_emissions(analyses, self.precedence, self.grammar.agreement, self.config)
        return TagLattice(analyses, entries)

    def decode(self, lattice: TagLattice, method: str = "bidirectional") -> Decoded:
        if method == "bidirectional":
            return decode_bidirectional(lattice.entries, self.tables, self.precedence)
        if method == "viterbi":
            return decode_viterbi(lattice.entries, self.tables)
        raise ValueError(f"unknown decoding method {method!r}")

    def tag(self, words: Sequence[str], method: str = "bidirectional") -> list[Analysis]:
        """Best analysis per word under the decoded tag sequence."""
        if not words:
            return []
        d = self.decode(self.lattice(words), method)
        return [e.analysis for e in d.entries]

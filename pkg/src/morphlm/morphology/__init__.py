"""Rule-driven morphological analysis and generation."""

from .grammar import (
    FALLBACK_TAG, AgreementRule, AgreementRuleSet, Grammar, GrammarError, Morpheme, PathError,
    PosTag, RewriteRule, Slot, WordType, bundled_grammar_path, generate, load_grammar,
    load_toy_grammar, normalize, parse_grammar,
)
from .analyzer import Analysis, analyze, analyze_sentence, load_counts, score_analysis
from .agreement import agreement_score, rule_matches

__all__ = [
    "FALLBACK_TAG", "AgreementRule", "AgreementRuleSet", "Grammar", "GrammarError", "Morpheme",
    "PathError", "PosTag", "RewriteRule", "Slot", "WordType", "bundled_grammar_path", "generate",
    "load_grammar", "load_toy_grammar", "normalize", "parse_grammar",
    "Analysis", "analyze", "analyze_sentence", "load_counts", "score_analysis",
    "agreement_score", "rule_matches",
]

"""Unsupervised factored POS tagging."""

from .emission import (
    DEFAULT_OUTER_EXPONENT, EmissionConfig, EmissionEntry, SigmoidRange, emission, log_sigma,
    marginals, sentence_emissions, sigma,
)
from .transitions import (
    BACKOFF_MIN_COUNT, DEFAULT_ALPHA, TransitionCounts, TransitionTables, estimate_transitions,
)
from .decode import Decoded, decode_bidirectional, decode_viterbi, emission_argmax
from .tagger import TagLattice, Tagger

__all__ = [
    "DEFAULT_OUTER_EXPONENT", "EmissionConfig", "EmissionEntry", "SigmoidRange", "emission",
    "log_sigma", "marginals", "sentence_emissions", "sigma",
    "BACKOFF_MIN_COUNT", "DEFAULT_ALPHA", "TransitionCounts", "TransitionTables",
    "estimate_transitions", "Decoded", "decode_bidirectional", "decode_viterbi",
    "emission_argmax", "TagLattice", "Tagger",
]

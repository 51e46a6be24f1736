"""Morphology-aware language modelling toolkit.

Rule-driven morphological analysis, unsupervised factored POS tagging,
affix-set vocabularies, a two-tier transformer encoder and masked-morphology
pretraining, all on a small fp64 autodiff kernel.
"""

__version__ = "0.1.0"

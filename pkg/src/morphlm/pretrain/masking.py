"""Token selection and corruption for masked-morphology prediction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..encoder import MorphoBatch
from ..kernel.random import derive_seed

NONE, MASK, RANDOM, KEEP = 0, 1, 2, 3
ACTION_NAMES = {NONE: "none", MASK: "MASK", RANDOM: "RANDOM", KEEP: "KEEP"}


@dataclass(frozen=True)
class MaskingSpec:
    stem_mask_id: int
    pos_mask_id: int
    affix_set_mask_id: int
    n_stems: int
    first_regular_stem: int = 4
    mask_rate: float = 0.15
    action_probs: tuple[float, float, float] = (0.8, 0.1, 0.1)
    omit_rate: float = 0.7

    def __post_init__(self):
        if not 0.0 < self.mask_rate <= 1.0:
            raise ValueError("mask_rate must lie in (0, 1]")
        if abs(sum(self.action_probs) - 1.0) > 1e-9 or min(self.action_probs) < 0:
            raise ValueError("action probabilities must be nonnegative and sum to 1")
        if not 0.0 <= self.omit_rate <= 1.0:
            raise ValueError("omit_rate must lie in [0, 1]")
        if self.first_regular_stem >= self.n_stems:
            raise ValueError("no regular stems to draw RANDOM replacements from")

    @classmethod
    def from_vocab(cls, vocab, **kw) -> "MaskingSpec":
        return cls(vocab.stem_mask_id, vocab.pos_mask_id, vocab.affix_sets.mask_id, vocab.n_stems,
                   vocab.n_special_stems, **kw)


@dataclass
class MaskingPlan:
    selected: np.ndarray         # [B, T] bool
    action: np.ndarray           # [B, T] int8, NONE for unselected
    affixes_omitted: np.ndarray  # [B, T] bool
    seed: int
    original: MorphoBatch

    @property
    def n_selected(self) -> int:
        return int(self.selected.sum())

    def positions(self) -> np.ndarray:
        """Flat indices (b * T + t) of selected slots, row-major."""
        return np.flatnonzero(self.selected.reshape(-1))


def apply_masking(batch: MorphoBatch, seed: int, spec: MaskingSpec,
                  ensure_nonempty: bool = False) -> tuple[MorphoBatch, MaskingPlan]:
    """Select ~mask_rate of real words; MASK / RANDOM / KEEP them 80/10/10.

    MASK and RANDOM also mask the POS-role and affix-set ids and, with
    probability ``omit_rate`` per token, drop every affix unit of the word.
    """
    rng = np.random.default_rng(derive_seed(seed, "masking"))
    shape = batch.shape
    u_sel = rng.random(shape)
    u_act = rng.random(shape)
    u_omit = rng.random(shape)
    rand_stem = rng.integers(spec.first_regular_stem, spec.n_stems, size=shape)
    real = batch.word_mask
    selected = (u_sel < spec.mask_rate) & real
    if ensure_nonempty and not selected.any() and real.any():
        cand = np.flatnonzero(real.reshape(-1))
        selected.reshape(-1)[cand[rng.integers(len(cand))]] = True
    p_mask, p_rand, _ = spec.action_probs
    action = np.where(u_act < p_mask, MASK, np.where(u_act < p_mask + p_rand, RANDOM, KEEP))
    action = np.where(selected, action, NONE).astype(np.int8)
    corrupt = (action == MASK) | (action == RANDOM)
    omitted = corrupt & (u_omit < spec.omit_rate)

    out = batch.copy()
    out.stem_ids = np.where(action == MASK, spec.stem_mask_id,
                            np.where(action == RANDOM, rand_stem, batch.stem_ids))
    out.pos_ids = np.where(corrupt, spec.pos_mask_id, batch.pos_ids)
    out.affix_set_ids = np.where(corrupt, spec.affix_set_mask_id, batch.affix_set_ids)
    out.affix_mask = batch.affix_mask & ~omitted[..., None]
    return out, MaskingPlan(selected, action, omitted, seed, batch)


def adr_target(affix_ids, n: int) -> np.ndarray | None:
    """1/m at each of the word's m affixes; ``None`` when m = 0 (no target row)."""
    ids = [int(a) for a in affix_ids]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate affix id in {ids}")
    if any(a < 0 or a >= n for a in ids):
        raise ValueError(f"affix id out of range for N={n}: {ids}")
    if not ids:
        return None
    t = np.zeros(n)
    t[ids] = 1.0 / len(ids)
    return t

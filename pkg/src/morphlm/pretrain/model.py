"""Prediction heads on top of the two-tier encoder, and the pretraining loss."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import kernel as K
from ..encoder import ConfigError, ModelConfig, MorphoBatch, TwoTierEncoder
from ..kernel.nn import Init, LayerNorm, Linear, Module, ShapeOnly
from ..kernel.random import derive_seed
from .masking import MaskingPlan, adr_target

AFFIX_OBJECTIVE = {"ASC": "ASC", "ADR": "ADR", "AVG": "ADR", "STEM_ONLY": None}


class TiedHead(Module):
    """Linear -> GELU -> LayerNorm, then logits against a shared embedding table."""

    def __init__(self, init, hidden: int, table, n_out: int):
        d = table.shape[1]
        self.transform = Linear(init, hidden, d)
        self.ln = LayerNorm(init, d)
        self.bias = init.zeros((n_out,))
        self._table = [table]  # held in a list so the shared tensor is not counted twice

    def __call__(self, h):
        z = self.ln(K.gelu(self.transform(h)))
        return K.add(K.matmul(z, K.permute(self._table[0], (1, 0))), self.bias)


class PretrainModel(Module):
    def __init__(self, init, cfg: ModelConfig):
        self.cfg = cfg
        self.encoder = TwoTierEncoder(init, cfg)
        h = cfg.sentence.hidden
        v = cfg.vocab
        self.stem_head = TiedHead(init, h, self.encoder.stem.table, v.stems)
        obj = AFFIX_OBJECTIVE[cfg.variant]
        if obj == "ASC":
            self.affix_head = TiedHead(init, h, self.encoder.morpho.affix_set.table, v.affix_sets)
        elif obj == "ADR":
            self.affix_head = TiedHead(init, h, self.encoder.morpho.affix.table, v.affixes)

    @property
    def objective(self) -> str | None:
        return AFFIX_OBJECTIVE[self.cfg.variant]

    def predict(self, batch: MorphoBatch, positions: np.ndarray, seed: int | None = None,
                training: bool = False):
        """Stem and affix logits at flat word positions ``positions`` (b * T + t)."""
        enc = self.encoder(batch, seed, training)
        b, t = batch.shape
        words = K.index_select(enc.hidden, 1, list(range(1, t + 1)))
        rows = K.index_select(K.reshape(words, (b * t, words.shape[-1])), 0, positions)
        stem = self.stem_head(rows)
        affix = self.affix_head(rows) if self.objective else None
        return stem, affix


@dataclass
class LossParts:
    total: K.Tensor
    stem_loss: float
    affix_loss: float
    stem_acc: float
    n_slots: int


def pretrain_loss(stem_logits, affix_logits, plan: MaskingPlan, objective: str | None,
                  n_affixes: int | None = None) -> LossParts:
    """Stem cross-entropy plus the variant term, summed with weight 1.

    ADR rows exist only for slots with at least one affix; the KL term is the
    mean over those rows and exactly 0 if there are none.
    """
    pos = plan.positions()
    if len(pos) == 0:
        raise ValueError("masking plan selects no slots")
    orig = plan.original
    stem_t = orig.stem_ids.reshape(-1)[pos]
    stem = K.cross_entropy(stem_logits, stem_t)
    acc = float((stem_logits.data.argmax(1) == stem_t).mean())
    total = stem
    affix_val = 0.0
    if objective is None:
        if affix_logits is not None:
            raise ConfigError("STEM_ONLY objective got affix logits")
    elif affix_logits is None:
        raise ConfigError(f"{objective} objective needs affix logits")
    elif objective == "ASC":
        aff = K.cross_entropy(affix_logits, orig.affix_set_ids.reshape(-1)[pos])
        total = K.add(total, aff)
        affix_val = aff.item()
    elif objective == "ADR":
        n = n_affixes or affix_logits.shape[1]
        width = orig.affix_ids.shape[-1]
        a = orig.affix_ids.reshape(orig.stem_ids.size, width)
        m = orig.affix_mask.reshape(a.shape)
        rows, targets = [], []
        for i, p in enumerate(pos if width else ()):
            tgt = adr_target(a[p][m[p]], n)
            if tgt is not None:
                rows.append(i)
                targets.append(tgt)
        if rows:
            lp = K.log_softmax(K.index_select(affix_logits, 0, rows), axis=-1)
            aff = K.kl_divergence(np.stack(targets), lp)
            total = K.add(total, aff)
            affix_val = aff.item()
    else:
        raise ConfigError(f"unknown objective {objective!r}")
    return LossParts(total, stem.item(), affix_val, acc, len(pos))


def build_model(cfg: ModelConfig, seed: int = 0) -> PretrainModel:
    return PretrainModel(Init(np.random.default_rng(derive_seed(seed, "init")), cfg.init_std), cfg)


def count_parameters(cfg: ModelConfig) -> int:
    """Parameter count of the full pretraining model without allocating it."""
    return PretrainModel(ShapeOnly(), cfg).num_parameters()


def init_loss_estimate(cfg: ModelConfig, adr_row_sizes=()) -> float:
    """Expected loss of near-uniform logits: ln|stems| plus the variant head term."""
    est = math.log(cfg.vocab.stems)
    obj = AFFIX_OBJECTIVE[cfg.variant]
    if obj == "ASC":
        est += math.log(cfg.vocab.affix_sets)
    elif obj == "ADR" and len(adr_row_sizes):
        est += float(np.mean([math.log(cfg.vocab.affixes / m) for m in adr_row_sizes]))
    return est

"""Two-tier encoder: a per-word morphology transformer feeding a sentence transformer."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .. import kernel as K
from ..kernel.nn import Embedding, Init, LayerNorm, Linear, Module, ShapeOnly
from ..kernel.random import derive_seed
from .config import ConfigError, ModelConfig
from .layers import Block, key_mask_bias, relative_buckets


class LengthError(ValueError):
    """A sentence is longer than the configured maximum number of positions."""


@dataclass
class MorphoBatch:
    """Padded id arrays for B sentences of up to T words and A affixes per word."""

    stem_ids: np.ndarray       # [B, T]
    pos_ids: np.ndarray        # [B, T]
    affix_set_ids: np.ndarray  # [B, T]
    affix_ids: np.ndarray      # [B, T, A]
    affix_mask: np.ndarray     # [B, T, A] bool
    word_mask: np.ndarray      # [B, T] bool

    @property
    def shape(self) -> tuple[int, int]:
        return self.stem_ids.shape

    def copy(self) -> "MorphoBatch":
        return MorphoBatch(*(a.copy() for a in (self.stem_ids, self.pos_ids, self.affix_set_ids,
                                                 self.affix_ids, self.affix_mask, self.word_mask)))


def collate(sentences: Sequence[Sequence], pad_stem: int = 0, pad_pos: int = 0,
            empty_affix_set: int = 0, max_affixes: int | None = None) -> MorphoBatch:
    """Pad WordPiece sentences into a MorphoBatch."""
    b = len(sentences)
    t = max(1, max((len(s) for s in sentences), default=1))
    a = max((len(w.affix_ids) for s in sentences for w in s), default=0)
    if max_affixes is not None and a > max_affixes:
        raise ValueError(f"word with {a} affixes exceeds the configured maximum {max_affixes}")
    stem = np.full((b, t), pad_stem, dtype=np.int64)
    pos = np.full((b, t), pad_pos, dtype=np.int64)
    aset = np.full((b, t), empty_affix_set, dtype=np.int64)
    aff = np.zeros((b, t, a), dtype=np.int64)
    amask = np.zeros((b, t, a), dtype=bool)
    wmask = np.zeros((b, t), dtype=bool)
    for i, s in enumerate(sentences):
        for j, w in enumerate(s):
            stem[i, j], pos[i, j], aset[i, j] = w.stem_id, w.pos_tag_id, w.affix_set_id
            wmask[i, j] = True
            k = len(w.affix_ids)
            aff[i, j, :k] = w.affix_ids
            amask[i, j, :k] = True
    return MorphoBatch(stem, pos, aset, aff, amask, wmask)


def canonical_affix_order(ids: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort real affix ids ascending within each word, padding last."""
    if ids.shape[-1] == 0:
        return ids, mask
    key = np.where(mask, ids, np.iinfo(np.int64).max)
    order = np.argsort(key, axis=-1, kind="stable")
    return np.take_along_axis(ids, order, -1), np.take_along_axis(mask, order, -1)


def _column(x, k: int):
    # [N, U, d] -> [N, d] for unit k
    n, _, d = x.shape
    return K.reshape(K.index_select(x, 1, [k]), (n, d))


def _repeat_rows(x, n: int):
    # [d] -> [n, 1, d]
    return K.index_select(K.reshape(x, (1, 1, x.shape[0])), 0, [0] * n)


class MorphologyEncoder(Module):
    """Tier 1: attention over {POS-role units, stem unit, affix units} of one word,
    with no positional signal."""

    def __init__(self, init, cfg: ModelConfig):
        m, v = cfg.morpho, cfg.vocab
        self.variant = cfg.variant
        d = m.hidden
        self.pos_a = Embedding(init, v.pos, d)
        self.pos_b = Embedding(init, v.pos, d)
        if cfg.variant == "ADR":
            self.pos_c = Embedding(init, v.pos, d)
        elif cfg.variant == "ASC":
            self.affix_set = Embedding(init, v.affix_sets, d)
        self.stem = Embedding(init, v.stems, d)
        self.affix = Embedding(init, v.affixes, d)
        self.blocks = [Block(init, d, m.heads, m.ffn) for _ in range(m.layers)]
        self.ln_f = LayerNorm(init, d)
        self.heads = m.heads
        self.hidden = d

    @property
    def n_roles(self) -> int:
        return 2 if self.variant == "AVG" else 3

    def units(self, stem_ids, pos_ids, aset_ids, affix_ids):
        n = stem_ids.shape[0]
        d = self.hidden
        roles = [self.pos_a(pos_ids), self.pos_b(pos_ids)]
        if self.variant == "ADR":
            roles.append(self.pos_c(pos_ids))
        elif self.variant == "ASC":
            roles.append(self.affix_set(aset_ids))
        parts = [K.reshape(r, (n, 1, d)) for r in roles]
        parts.append(K.reshape(self.stem(stem_ids), (n, 1, d)))
        if affix_ids.shape[1]:
            parts.append(self.affix(affix_ids))
        return K.concat(parts, axis=1)

    def __call__(self, stem_ids, pos_ids, aset_ids, affix_ids, affix_mask, canonical: bool = True):
        """Inputs are flat over words: ids [N], affix ids/mask [N, A].  Returns the
        four feature vectors of each word, shape [N, 4, hidden] as a list of [N, hidden]."""
        stem_ids = np.asarray(stem_ids)
        affix_ids = np.asarray(affix_ids).reshape(stem_ids.shape[0], -1)
        affix_mask = np.asarray(affix_mask, dtype=bool).reshape(affix_ids.shape)
        if canonical:
            affix_ids, affix_mask = canonical_affix_order(affix_ids, affix_mask)
        x = self.units(stem_ids, np.asarray(pos_ids), np.asarray(aset_ids), affix_ids)
        n, u, _ = x.shape
        r = self.n_roles
        valid = np.concatenate([np.ones((n, r + 1), dtype=bool), affix_mask], axis=1)
        mask = key_mask_bias(valid, self.heads) if not valid.all() else None
        for blk in self.blocks:
            x = blk(x, mask=mask)
        x = self.ln_f(x)
        feats = [_column(x, k) for k in range(r)]
        if self.variant == "AVG":
            feats.append(self._affix_mean(x, affix_mask))
        feats.append(_column(x, r))
        return feats

    def _affix_mean(self, x, affix_mask):
        n, u, d = x.shape
        a = affix_mask.shape[1]
        if a == 0 or not affix_mask.any():
            return K.Tensor(np.zeros((n, d)))
        aff = K.index_select(x, 1, list(range(u - a, u)))
        cnt = np.maximum(affix_mask.sum(1, keepdims=True), 1)
        w = np.broadcast_to((affix_mask / cnt)[:, :, None], (n, a, d)).copy()
        return K.sum(K.mul(aff, K.Tensor(w)), axis=1)


class PositionalBias(Module):
    """Untied positional term plus per-head relative-distance bucket bias,
    shared by every sentence-encoder layer; CLS gets its own learned scalars."""

    def __init__(self, init, cfg: ModelConfig):
        s = cfg.sentence
        self.table = init.normal((cfg.max_positions, s.hidden))
        self.ln = LayerNorm(init, s.hidden)
        self.uq = Linear(init, s.hidden, s.hidden, bias=False)
        self.uk = Linear(init, s.hidden, s.hidden, bias=False)
        self.rel = init.normal((s.heads, cfg.rel_buckets))
        self.cls_to = init.normal((s.heads,))    # CLS query row
        self.to_cls = init.normal((s.heads,))    # CLS key column
        self.heads = s.heads
        self.head_size = s.head_size
        self.buckets = cfg.rel_buckets
        self.max_distance = cfg.rel_max_distance
        self.max_positions = cfg.max_positions

    def word_bias(self, length: int):
        """[H, L, L] bias between word positions (positional term + relative bias)."""
        if length > self.max_positions:
            raise LengthError(f"sentence of {length} words exceeds max_positions={self.max_positions}")
        h, hs = self.heads, self.head_size
        p = self.ln(K.index_select(self.table, 0, list(range(length))))
        pq = K.permute(K.reshape(self.uq(p), (length, h, hs)), (1, 0, 2))
        pk = K.permute(K.reshape(self.uk(p), (length, h, hs)), (1, 0, 2))
        pos = K.scale(K.matmul(pq, K.permute(pk, (0, 2, 1))), 1.0 / math.sqrt(2 * hs))
        b = relative_buckets(length, self.buckets, self.max_distance)
        rel = K.reshape(K.index_select(self.rel, 1, b.reshape(-1)), (h, length, length))
        return K.add(pos, rel)

    def __call__(self, length: int):
        """[H, L+1, L+1] bias including the leading CLS slot."""
        h = self.heads
        body = self.word_bias(length)
        col = K.reshape(K.index_select(K.reshape(self.to_cls, (h, 1)), 1, [0] * length), (h, length, 1))
        row = K.reshape(K.index_select(K.reshape(self.cls_to, (h, 1)), 1, [0] * (length + 1)), (h, 1, length + 1))
        return K.concat([row, K.concat([col, body], axis=2)], axis=1)


@dataclass
class EncodedSentence:
    hidden: K.Tensor          # [B, T+1, hidden], row 0 is CLS
    positional_bias: K.Tensor  # [H, T+1, T+1]
    word_vectors: K.Tensor     # [B, T, hidden] tier-2 inputs


class TwoTierEncoder(Module):
    def __init__(self, init, cfg: ModelConfig):
        s = cfg.sentence
        self.cfg = cfg
        if cfg.variant != "STEM_ONLY":
            self.morpho = MorphologyEncoder(init, cfg)
        self.stem = Embedding(init, cfg.vocab.stems, s.stem_embed_dim)
        self.cls = init.normal((s.hidden,))
        self.position = PositionalBias(init, cfg)
        scale = 1.0 / math.sqrt(2 * s.head_size)
        self.blocks = [Block(init, s.hidden, s.heads, s.ffn, scale) for _ in range(s.layers)]
        self.ln_f = LayerNorm(init, s.hidden)

    def word_vectors(self, batch: MorphoBatch, canonical: bool = True):
        b, t = batch.shape
        stem = self.stem(batch.stem_ids)
        if self.cfg.variant == "STEM_ONLY":
            return stem
        n = b * t
        a = batch.affix_ids.shape[-1]
        feats = self.morpho(batch.stem_ids.reshape(n), batch.pos_ids.reshape(n),
                            batch.affix_set_ids.reshape(n), batch.affix_ids.reshape(n, a),
                            batch.affix_mask.reshape(n, a), canonical)
        return assemble_word_vector(self.cfg, feats, stem)

    def __call__(self, batch: MorphoBatch, seed: int | None = None, training: bool = False,
                 canonical: bool = True) -> EncodedSentence:
        b, t = batch.shape
        if t > self.cfg.max_positions:
            raise LengthError(f"sentence of {t} words exceeds max_positions={self.cfg.max_positions}")
        p = self.cfg.dropout
        counter = iter(range(1 << 30))
        drop: Callable | None = None
        if training and p > 0:
            if seed is None:
                raise ValueError("training with dropout needs a seed")
            drop = lambda x: K.dropout(x, p, derive_seed(seed, "dropout", next(counter)))
        words = self.word_vectors(batch, canonical)
        x = K.concat([_repeat_rows(self.cls, b), words], axis=1)
        if drop is not None:
            x = drop(x)
        bias = self.position(t)
        valid = np.concatenate([np.ones((b, 1), dtype=bool), batch.word_mask], axis=1)
        mask = key_mask_bias(valid, self.cfg.sentence.heads) if not valid.all() else None
        for blk in self.blocks:
            x = blk(x, bias=bias, mask=mask, drop=drop)
        return EncodedSentence(self.ln_f(x), bias, words)


def assemble_word_vector(cfg: ModelConfig, features: Sequence, stem_embedding):
    """[feat_1 | ... | feat_k | stem] with k = cfg.feature_slots."""
    if len(features) != cfg.feature_slots:
        raise ConfigError(f"expected {cfg.feature_slots} feature vectors, got {len(features)}")
    if not features:
        if stem_embedding.shape[-1] != cfg.sentence.hidden:
            raise ConfigError("stem embedding width must equal sentence hidden for STEM_ONLY")
        return stem_embedding
    total = sum(f.shape[-1] for f in features) + stem_embedding.shape[-1]
    if total != cfg.sentence.hidden:
        raise ConfigError(f"assembled width {total} != sentence hidden {cfg.sentence.hidden}")
    lead = stem_embedding.shape[:-1]
    parts = [K.reshape(f, lead + (f.shape[-1],)) for f in features]
    return K.concat(parts + [stem_embedding], axis=-1)


def build_encoder(cfg: ModelConfig, seed: int = 0) -> TwoTierEncoder:
    return TwoTierEncoder(Init(np.random.default_rng(derive_seed(seed, "init")), cfg.init_std), cfg)


def count_encoder_parameters(cfg: ModelConfig) -> int:
    return TwoTierEncoder(ShapeOnly(), cfg).num_parameters()

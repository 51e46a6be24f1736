"""Seed derivation: every random stream is a stable hash of (seed, purpose, index...)."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, purpose: str, *index: int) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update((int(seed) & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"))
    h.update(b"\x00" + purpose.encode("utf-8"))
    for i in index:
        h.update(b"\x00" + str(int(i)).encode())
    return int.from_bytes(h.digest(), "little")


def rng(seed: int, purpose: str = "", *index: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, purpose, *index))

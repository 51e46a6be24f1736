"""Bundled JSON presets, resolvable by bare file name."""

from __future__ import annotations

import json
from pathlib import Path

PRESET_DIR = Path(__file__).resolve().parent.parent / "data" / "presets"


def preset_path(name) -> Path:
    p = Path(name)
    if p.exists():
        return p
    for q in (PRESET_DIR / p.name, PRESET_DIR / f"{p.name}.json"):
        if q.exists():
            return q
    raise FileNotFoundError(f"config {name!r} not found (looked in . and {PRESET_DIR})")


def load_preset(name) -> dict:
    p = preset_path(name)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{p}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from None

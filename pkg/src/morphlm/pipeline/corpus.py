"""Raw-text reading and the parsed-corpus file format.

Parsed corpus: UTF-8, one WordPiece per line,
``surface<TAB>stem<TAB>pos_tag<TAB>affix,ids<TAB>score``, a blank line after
every sentence, and ``# doc N`` lines opening each document.  Sequence
labeling files carry a sixth ``label`` column.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

TOKEN = re.compile(r"\w+|[^\w\s]", re.UNICODE)
TERMINAL = {".", "?", "!"}


class DataError(ValueError):
    """Malformed input data; the message names the file and line."""


def split_sentences(line: str) -> list[list[str]]:
    """Tokenize one line and cut after every terminal punctuation mark."""
    out, cur = [], []
    for tok in TOKEN.findall(line):
        cur.append(tok)
        if tok in TERMINAL:
            out.append(cur)
            cur = []
    if cur:
        out.append(cur)
    return out


def read_raw(path) -> list[list[list[str]]]:
    """Documents (separated by blank lines) of tokenized sentences."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    docs, cur = [], []
    for line in text.splitlines():
        if not line.strip():
            if cur:
                docs.append(cur)
                cur = []
            continue
        cur.extend(split_sentences(line))
    if cur:
        docs.append(cur)
    return docs


@dataclass(frozen=True)
class TokenLine:
    surface: str
    stem: str
    pos_tag: str
    affixes: tuple[str, ...]
    score: float
    label: str | None = None

    def format(self) -> str:
        fields = [self.surface, self.stem, self.pos_tag, ",".join(self.affixes), f"{self.score:.6f}"]
        if self.label is not None:
            fields.append(self.label)
        return "\t".join(fields)


def parse_token_line(line: str, where: str = "", labeled: bool = False) -> TokenLine:
    parts = line.split("\t")
    want = 6 if labeled else 5
    if len(parts) != want:
        raise DataError(f"{where}: expected {want} tab-separated fields, got {len(parts)}")
    try:
        score = float(parts[4])
    except ValueError:
        raise DataError(f"{where}: score {parts[4]!r} is not a number") from None
    affixes = tuple(parts[3].split(",")) if parts[3] else ()
    return TokenLine(parts[0], parts[1], parts[2], affixes, score, parts[5] if labeled else None)


def write_parsed(path, documents: Sequence[Sequence[Sequence[TokenLine]]]):
    Path(path).write_text(format_parsed(documents), encoding="utf-8")


def format_parsed(documents) -> str:
    out = []
    for d, doc in enumerate(documents):
        out.append(f"# doc {d}\n")
        for sent in doc:
            out.extend(t.format() + "\n" for t in sent)
            out.append("\n")
    return "".join(out)


def iter_parsed(path, labeled: bool = False) -> Iterator[tuple[int, list[tuple[int, TokenLine]]]]:
    """Yield (document index, sentence) where a sentence is [(line number, TokenLine)]."""
    path = Path(path)
    doc = 0
    cur: list[tuple[int, TokenLine]] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if line.startswith("#") and "\t" not in line:
                m = re.match(r"#\s*doc\s+(\d+)", line)
                if m:
                    doc = int(m.group(1))
                continue
            if not line:
                if cur:
                    yield doc, cur
                    cur = []
                continue
            cur.append((lineno, parse_token_line(line, f"{path}:{lineno}", labeled)))
    if cur:
        yield doc, cur


def read_parsed(path, labeled: bool = False) -> list[list[TokenLine]]:
    return [[t for _, t in sent] for _, sent in iter_parsed(path, labeled)]

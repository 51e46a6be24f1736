"""Grammar model: slots, morphemes, per-word-type morphotactics DAGs and
boundary rewrite rules.  See ``docs/grammar-format.md`` for the file schema."""

from __future__ import annotations

import json
import math
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

START = "^"
END = "$"
BOUNDARY = "+"
FALLBACK_TAG = "UNK#BPE"
MAX_RULE_CONTEXT = 3
_BAD_ID = re.compile(r"[\s,]")


class GrammarError(ValueError):
    """A grammar file failed validation; the message names the location."""


class PathError(ValueError):
    """A morpheme sequence is not a start-to-end traversal of any word type."""


def normalize(text: str) -> str:
    return unicodedata.normalize("NFC", text).lower()


@dataclass(frozen=True)
class PosTag:
    name: str
    weight: float
    description: str = ""


@dataclass(frozen=True)
class Slot:
    name: str
    is_stem: bool = False


@dataclass(frozen=True)
class Morpheme:
    id: str
    slot: str
    form: str
    gloss: str = ""
    class_marker: str | None = None


@dataclass(frozen=True)
class RewriteRule:
    left: str
    right: str
    replacement: str
    left_context: str = ""
    right_context: str = ""

    @property
    def pattern(self) -> str:
        return f"{self.left}{BOUNDARY}{self.right}"

    def apply(self, surface: str, form: str) -> str | None:
        if not surface.endswith(self.left_context + self.left):
            return None
        if not form.startswith(self.right + self.right_context):
            return None
        cut = len(surface) - len(self.left)
        return surface[:cut] + self.replacement + form[len(self.right):]


@dataclass(frozen=True)
class WordType:
    name: str
    pos_tag: str
    arcs: tuple[tuple[str, str], ...]

    def successors(self, node: str) -> list[str]:
        return [b for a, b in self.arcs if a == node]


@dataclass(frozen=True)
class AgreementRule:
    weight: float
    name: str = ""
    candidate_tags: tuple[str, ...] | None = None
    neighbor_tags: tuple[str, ...] | None = None
    offsets: tuple[int, ...] | None = None
    same_class: bool = True
    label: str | None = None


@dataclass(frozen=True)
class AgreementRuleSet:
    rules: tuple[AgreementRule, ...]
    window: int = 7

    def __post_init__(self):
        if self.window < 1:
            raise GrammarError(f"agreement window must be >= 1, got {self.window}")
        for r in self.rules:
            if not math.isfinite(r.weight):
                raise GrammarError(f"agreement rule {r.name!r} has non-finite weight")

    @classmethod
    def default(cls, window: int = 7) -> "AgreementRuleSet":
        return cls((AgreementRule(weight=1.0, name="shared-class"),), window)


@dataclass
class Grammar:
    pos_tags: list[PosTag]
    slots: list[Slot]
    morphemes: list[Morpheme]
    word_types: list[WordType]
    rewrite_rules: list[RewriteRule]
    agreement: AgreementRuleSet
    name: str = ""
    by_id: dict[str, Morpheme] = field(init=False, repr=False)
    by_slot: dict[str, list[Morpheme]] = field(init=False, repr=False)

    def __post_init__(self):
        self.by_id = {m.id: m for m in self.morphemes}
        self.by_slot = {s.name: [] for s in self.slots}
        for m in self.morphemes:
            self.by_slot[m.slot].append(m)
        self._slots = {s.name: s for s in self.slots}
        self._tags = {t.name: t for t in self.pos_tags}
        self._types = {w.name: w for w in self.word_types}

    def slot(self, name: str) -> Slot:
        return self._slots[name]

    def tag(self, name: str) -> PosTag:
        return self._tags[name]

    def word_type(self, name: str) -> WordType:
        return self._types[name]

    @property
    def tag_names(self) -> list[str]:
        return [t.name for t in self.pos_tags]

    def precedence(self, tag: str) -> float:
        return self._tags[tag].weight

    @property
    def affixes(self) -> list[Morpheme]:
        return [m for m in self.morphemes if not self._slots[m.slot].is_stem]

    @property
    def stems(self) -> list[Morpheme]:
        return [m for m in self.morphemes if self._slots[m.slot].is_stem]

    @property
    def max_left(self) -> int:
        """Characters at the end of a surface that a later boundary may rewrite."""
        return max((len(r.left) for r in self.rewrite_rules), default=0)

    # -- generation ----------------------------------------------------------

    def join(self, surface: str, form: str) -> str:
        """Resolve one morpheme boundary: first matching rule, else plain concatenation."""
        for rule in self.rewrite_rules:
            out = rule.apply(surface, form)
            if out is not None:
                return out
        return surface + form

    def rewrite(self, underlying: str) -> str:
        """Apply the rule cascade to a ``+``-delimited underlying string.

        Boundaries are resolved leftmost first; each resolution consumes its
        marker, so the loop ends after one pass per boundary.
        """
        parts = underlying.split(BOUNDARY)
        surface = parts[0]
        for form in parts[1:]:
            surface = self.join(surface, form)
        return surface

    def underlying(self, morphemes: Sequence[str]) -> str:
        return BOUNDARY.join(self.by_id[m].form for m in morphemes)

    def accepts(self, word_type: str, morphemes: Sequence[str]) -> bool:
        wt = self._types.get(word_type)
        if wt is None or not morphemes:
            return False
        node = START
        for mid in morphemes:
            m = self.by_id.get(mid)
            if m is None or m.slot not in wt.successors(node):
                return False
            node = m.slot
        return END in wt.successors(node)

    def word_types_for(self, morphemes: Sequence[str]) -> list[str]:
        return [w.name for w in self.word_types if self.accepts(w.name, morphemes)]

    def generate(self, morphemes: Sequence[str], word_type: str | None = None) -> str:
        """Surface form of a morpheme path (stem and affixes in slot order)."""
        morphemes = list(morphemes)
        if word_type is None:
            if not self.word_types_for(morphemes):
                raise PathError(f"no word type accepts path {morphemes}")
        elif not self.accepts(word_type, morphemes):
            raise PathError(f"path {morphemes} is not a start-to-end traversal of word type {word_type!r}")
        return self.rewrite(self.underlying(morphemes))

    def paths(self, word_type: str | None = None) -> Iterator[tuple[str, tuple[str, ...]]]:
        """Enumerate every (word type, morpheme path) the grammar licenses."""
        types = self.word_types if word_type is None else [self._types[word_type]]
        for wt in types:
            stack: list[tuple[str, tuple[str, ...]]] = [(START, ())]
            while stack:
                node, path = stack.pop()
                for nxt in reversed(wt.successors(node)):
                    if nxt == END:
                        yield wt.name, path
                        continue
                    for m in reversed(self.by_slot[nxt]):
                        stack.append((nxt, path + (m.id,)))

    def stem_of(self, morphemes: Sequence[str]) -> tuple[str, tuple[str, ...], int]:
        """Split a path into (stem, affixes, number of affixes before the stem)."""
        for i, mid in enumerate(morphemes):
            if self._slots[self.by_id[mid].slot].is_stem:
                return mid, tuple(morphemes[:i]) + tuple(morphemes[i + 1:]), i
        raise PathError(f"path {list(morphemes)} has no stem")


def generate(g: Grammar, path, word_type: str | None = None) -> str:
    """Module-level convenience; ``path`` may also be an Analysis."""
    if hasattr(path, "morphemes") and hasattr(path, "word_type"):
        return g.generate(path.morphemes, path.word_type)
    return g.generate(path, word_type)


# -- loading -------------------------------------------------------------------

REQUIRED_KEYS = ("pos_tags", "slots", "morphemes", "edges", "rewrite_rules")


def _fail(where: str, msg: str):
    raise GrammarError(f"{where}: {msg}")


def _find_cycle(nodes: list[str], arcs: list[tuple[str, str]]) -> list[str] | None:
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in arcs:
        adj.setdefault(a, []).append(b)
    color: dict[str, int] = {}
    parent: dict[str, str] = {}
    for root in adj:
        if color.get(root):
            continue
        stack = [(root, iter(adj[root]))]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
            elif color.get(nxt, 0) == 0:
                color[nxt] = 1
                parent[nxt] = node
                stack.append((nxt, iter(adj.get(nxt, []))))
            elif color[nxt] == 1:
                cycle = [nxt, node]
                while cycle[-1] != nxt:
                    cycle.append(parent[cycle[-1]])
                return cycle[::-1]
    return None


def _parse_rule(i: int, raw: dict) -> RewriteRule:
    where = f"rewrite_rules[{i}]"
    pattern = raw.get("pattern")
    if not isinstance(pattern, str) or pattern.count(BOUNDARY) != 1:
        _fail(where, f"pattern must contain exactly one {BOUNDARY!r} boundary marker, got {pattern!r}")
    left, right = (normalize(p) for p in pattern.split(BOUNDARY))
    repl = normalize(str(raw.get("replacement", "")))
    lctx = normalize(str(raw.get("left_context", "")))
    rctx = normalize(str(raw.get("right_context", "")))
    if BOUNDARY in repl or BOUNDARY in lctx or BOUNDARY in rctx:
        _fail(where, "replacement and contexts may not contain the boundary marker")
    for label, s in (("left side", left), ("right side", right), ("left_context", lctx), ("right_context", rctx)):
        if len(s) > MAX_RULE_CONTEXT:
            _fail(where, f"{label} {s!r} longer than {MAX_RULE_CONTEXT} characters")
    return RewriteRule(left, right, repl, lctx, rctx)


def _parse_agreement(raw, tags: set[str]) -> AgreementRuleSet:
    if raw is None:
        return AgreementRuleSet.default()
    window = int(raw.get("window", 7))
    rules = []
    for i, r in enumerate(raw.get("rules", [])):
        where = f"agreement_rules.rules[{i}]"
        for key in ("candidate_tags", "neighbor_tags"):
            for t in r.get(key) or []:
                if t not in tags:
                    _fail(where, f"unknown POS tag {t!r} in {key}")
        offsets = r.get("offsets")
        if offsets is not None:
            half = window // 2
            offsets = tuple(int(o) for o in offsets)
            if any(o == 0 or abs(o) > half for o in offsets):
                _fail(where, f"offsets must be nonzero and within +-{half}")
        rules.append(AgreementRule(
            weight=float(r.get("weight", 1.0)),
            name=str(r.get("name", f"rule{i}")),
            candidate_tags=tuple(r["candidate_tags"]) if r.get("candidate_tags") else None,
            neighbor_tags=tuple(r["neighbor_tags"]) if r.get("neighbor_tags") else None,
            offsets=offsets,
            same_class=bool(r.get("same_class", True)),
            label=r.get("label"),
        ))
    if not rules:
        return AgreementRuleSet.default(window)
    return AgreementRuleSet(tuple(rules), window)


def parse_grammar(doc: dict) -> Grammar:
    for key in REQUIRED_KEYS:
        if key not in doc:
            _fail("grammar", f"missing top-level key {key!r}")

    pos_tags = []
    for i, t in enumerate(doc["pos_tags"]):
        w = float(t.get("weight", 1.0))
        if not math.isfinite(w):
            _fail(f"pos_tags[{i}]", "weight must be finite")
        pos_tags.append(PosTag(str(t["name"]), w, str(t.get("description", ""))))
    names = [t.name for t in pos_tags]
    if len(set(names)) != len(names):
        _fail("pos_tags", "duplicate tag name")
    if FALLBACK_TAG not in names:
        pos_tags.append(PosTag(FALLBACK_TAG, 0.0, "unanalyzable word"))
    tag_set = {t.name for t in pos_tags}

    slots = []
    for i, s in enumerate(doc["slots"]):
        name = s["name"] if isinstance(s, dict) else str(s)
        if name in (START, END):
            _fail(f"slots[{i}]", f"{name!r} is reserved")
        slots.append(Slot(name, bool(s.get("stem", False)) if isinstance(s, dict) else False))
    slot_names = [s.name for s in slots]
    if len(set(slot_names)) != len(slot_names):
        _fail("slots", "duplicate slot name")
    slot_set = set(slot_names)

    morphemes = []
    seen: dict[str, int] = {}
    for i, m in enumerate(doc["morphemes"]):
        where = f"morphemes[{i}]"
        slot = m.get("slot")
        if slot not in slot_set:
            _fail(where, f"unknown slot reference {slot!r}")
        form = normalize(str(m.get("form", "")))
        if not form or BOUNDARY in form:
            _fail(where, f"form must be nonempty and free of {BOUNDARY!r}")
        mid = str(m.get("id", f"{slot}:{form}"))
        if _BAD_ID.search(mid):
            _fail(where, f"morpheme id {mid!r} may not contain whitespace or commas")
        if mid in seen:
            _fail(where, f"duplicate morpheme id {mid!r} (first at morphemes[{seen[mid]}])")
        seen[mid] = i
        morphemes.append(Morpheme(mid, slot, form, str(m.get("gloss", "")), m.get("class_marker")))

    stems = {s.name for s in slots if s.is_stem}
    word_types = []
    edges = doc["edges"]
    if not isinstance(edges, dict) or not edges:
        _fail("edges", "must map word type names to {pos_tag, arcs}")
    for wname, spec in edges.items():
        where = f"edges.{wname}"
        tag = spec.get("pos_tag")
        if tag not in tag_set:
            _fail(where, f"unknown POS tag {tag!r}")
        arcs = []
        for j, arc in enumerate(spec.get("arcs", [])):
            a, b = arc
            for node in (a, b):
                if node not in slot_set and node not in (START, END):
                    _fail(f"{where}.arcs[{j}]", f"unknown slot reference {node!r}")
            if a == END or b == START:
                _fail(f"{where}.arcs[{j}]", "arcs may not leave $ or enter ^")
            arcs.append((a, b))
        nodes = sorted({n for arc in arcs for n in arc})
        cycle = _find_cycle(nodes, arcs)
        if cycle:
            _fail(where, "cycle in morphotactics graph: " + " -> ".join(cycle))
        _check_stem_paths(where, arcs, stems)
        word_types.append(WordType(wname, tag, tuple(arcs)))

    rules = [_parse_rule(i, r) for i, r in enumerate(doc["rewrite_rules"])]
    agreement = _parse_agreement(doc.get("agreement_rules"), tag_set)
    return Grammar(pos_tags, slots, morphemes, word_types, rules, agreement, str(doc.get("name", "")))


def _check_stem_paths(where: str, arcs: list[tuple[str, str]], stems: set[str]):
    """Every start-to-end path must visit exactly one stem slot, and every slot
    must lie on some start-to-end path."""
    succ: dict[str, list[str]] = {}
    pred: dict[str, list[str]] = {}
    for a, b in arcs:
        succ.setdefault(a, []).append(b)
        pred.setdefault(b, []).append(a)

    def reach(start, adj):
        seen, stack = {start}, [start]
        while stack:
            for n in adj.get(stack.pop(), []):
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        return seen

    fwd, bwd = reach(START, succ), reach(END, pred)
    if END not in fwd:
        _fail(where, "no path from ^ to $")
    for node in set(succ) | set(pred):
        if node not in fwd or node not in bwd:
            _fail(where, f"slot {node!r} is not on any path from ^ to $")

    # possible stem counts on paths from ^ to each node, via memoized DFS
    memo: dict[str, set[int]] = {START: {0}}

    def counts(node):
        if node in memo:
            return memo[node]
        out: set[int] = set()
        for p in pred.get(node, []):
            out |= counts(p)
        if node in stems:
            out = {c + 1 for c in out}
        memo[node] = out
        return out

    final = counts(END)
    if final != {1}:
        _fail(where, f"paths from ^ to $ visit {sorted(final)} stem slots; exactly one required")


def load_grammar(path) -> Grammar:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GrammarError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc
    try:
        return parse_grammar(doc)
    except GrammarError as exc:
        raise GrammarError(f"{path}: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise GrammarError(f"{path}: malformed grammar: {exc!r}") from exc


def bundled_grammar_path() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "toy_grammar.json"


def load_toy_grammar() -> Grammar:
    return load_grammar(bundled_grammar_path())

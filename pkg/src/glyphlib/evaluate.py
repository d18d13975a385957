"""Decomposition spans, parsing-style scoring, baselines, radical alignment.

A rewritten program induces a hierarchical decomposition of its glyph: every
fully-applied library-function occurrence in the program covers a contiguous
interval of emitted stroke positions. Two conventions are supported: `subtree`
(the interval covers everything the occurrence expands to, arguments included)
and `body` (the interval is the hull of the strokes the function's own body
contributes, argument strokes excluded). Span sets are laminar either way and
are scored against gold decompositions with micro-averaged P/R/F1 and exact
match, the convention used for constituency parsing.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import lru_cache

from .fileio import read_jsonl, write_jsonl
from .lang import (
    App, Corpus, ExpansionError, Expr, LibRef, Library, ListHead, Prim, Var,
    spine,
)

__all__ = [
    "SpanTree", "ScoreReport", "RadicalInventory", "RadicalAlignment",
    "extract_spans", "corpus_spans", "score_spans", "baseline_tree",
    "baseline_spans", "read_gold_spans", "write_spans",
    "read_radical_inventory", "align_radicals", "SPAN_MODES", "BASELINE_KINDS",
]

SPAN_MODES = ("subtree", "body")
BASELINE_KINDS = ("balanced", "random", "left", "right")


def _check_laminar(spans: frozenset[tuple[int, int]]) -> None:
    stack: list[tuple[int, int]] = []
    for s, e in sorted(spans, key=lambda p: (p[0], -p[1])):
        while stack and stack[-1][1] <= s:
            stack.pop()
        if stack and e > stack[-1][1]:
            raise ValueError(f"spans {stack[-1]} and {(s, e)} cross")
        stack.append((s, e))


@dataclass(frozen=True)
class SpanTree:
    """Laminar set of half-open stroke-index intervals for one glyph."""

    glyph_id: str
    n_strokes: int
    spans: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        if self.n_strokes < 1:
            raise ValueError("n_strokes must be >= 1")
        for s, e in self.spans:
            if not (0 <= s < e <= self.n_strokes):
                raise ValueError(f"span {(s, e)} out of bounds for n={self.n_strokes}")
        full = (0, self.n_strokes)
        if full not in self.spans:
            raise ValueError("the full span must be present")
        _check_laminar(self.spans)

    def nontrivial(self) -> frozenset[tuple[int, int]]:
        return self.spans - {(0, self.n_strokes)}


def _normalize_mode(mode: str) -> str:
    if mode == "body-contribution":
        mode = "body"
    if mode not in SPAN_MODES:
        raise ValueError(f"unknown span mode {mode!r}; expected one of {SPAN_MODES}")
    return mode


class _Emitter:
    __slots__ = ("pos",)

    def __init__(self) -> None:
        self.pos = 0


# an environment entry: (argument expr, its env, its sink, its surface flag)
_Binding = tuple


def _walk(e: Expr, env: tuple[_Binding, ...], lib: Library, mode: str,
          em: _Emitter, surface: bool, sink: list[int] | None,
          out: set[tuple[int, int]]) -> None:
    head, args = spine(e)
    if isinstance(head, ListHead):
        pass  # the sequence marker occupies no stroke position
    elif isinstance(head, Prim):
        if sink is not None:
            sink.append(em.pos)
        em.pos += 1
    elif isinstance(head, Var):
        if head.index >= len(env):
            raise ExpansionError(f"unbound variable #{head.index}")
        a_expr, a_env, a_sink, a_surface = env[head.index]
        _walk(a_expr, a_env, lib, mode, em, a_surface, a_sink, out)
    elif isinstance(head, LibRef):
        fn = lib.get(head.name)
        if len(args) < fn.arity:
            raise ExpansionError(
                f"{head.name} needs {fn.arity} argument(s), got {len(args)}")
        bound, args = args[:fn.arity], args[fn.arity:]
        newenv = tuple((b, env, sink, surface) for b in bound)
        if surface:
            if mode == "subtree":
                start = em.pos
                _walk(fn.body, newenv, lib, mode, em, False, sink, out)
                if em.pos > start:
                    out.add((start, em.pos))
            else:
                own: list[int] = []
                _walk(fn.body, newenv, lib, mode, em, False, own, out)
                if own:
                    out.add((own[0], own[-1] + 1))
        else:
            _walk(fn.body, newenv, lib, mode, em, False, sink, out)
    else:
        raise TypeError(f"not a term: {head!r}")
    for a in args:
        _walk(a, env, lib, mode, em, surface, sink, out)


def extract_spans(rewritten: Expr, library: Library, mode: str = "subtree",
                  glyph_id: str = "") -> SpanTree:
    """Decomposition spans induced by library-function occurrences.

    Every fully-applied occurrence in the program itself (not inside other
    bodies) contributes one interval; the full span is always included.
    """
    mode = _normalize_mode(mode)
    em = _Emitter()
    out: set[tuple[int, int]] = set()
    _walk(rewritten, (), library, mode, em, True, None, out)
    n = em.pos
    if n < 1:
        raise ExpansionError("program emits no strokes")
    out.add((0, n))
    return SpanTree(glyph_id=glyph_id, n_strokes=n, spans=frozenset(out))


def corpus_spans(corpus: Corpus, library: Library,
                 mode: str = "subtree") -> dict[str, SpanTree]:
    return {gid: extract_spans(e, library, mode, glyph_id=gid)
            for gid, e in corpus.entries.items()}


# ---------------------------------------------------------------------------
# scoring


@dataclass
class ScoreReport:
    precision: float
    recall: float
    f1: float
    exact_match: float
    n_glyphs: int
    n_predicted_spans: int
    n_gold_spans: int
    n_matched_spans: int
    n_predicted_only_glyphs: int = 0
    n_gold_only_glyphs: int = 0
    n_stroke_count_mismatches: int = 0

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "exact_match": self.exact_match,
            "n_glyphs": self.n_glyphs,
            "n_predicted_spans": self.n_predicted_spans,
            "n_gold_spans": self.n_gold_spans,
            "n_matched_spans": self.n_matched_spans,
            "n_predicted_only_glyphs": self.n_predicted_only_glyphs,
            "n_gold_only_glyphs": self.n_gold_only_glyphs,
            "n_stroke_count_mismatches": self.n_stroke_count_mismatches,
        }


def score_spans(predicted: dict[str, SpanTree], gold: dict[str, SpanTree],
                include_full_span: bool = False) -> ScoreReport:
    """Micro-averaged span precision/recall/F1 plus exact-match percentage.

    The trivial full span is excluded unless include_full_span is set. Gold
    glyphs without a prediction count as zero-recall items; predicted glyphs
    absent from gold are excluded from the averages and only reported. Glyphs
    whose predicted and gold stroke counts disagree cannot be aligned and are
    likewise excluded and reported.
    """
    common = sorted(predicted.keys() & gold.keys())
    if not common:
        raise ValueError("predicted and gold share no glyph ids")

    def sel(t: SpanTree) -> frozenset[tuple[int, int]]:
        return t.spans if include_full_span else t.nontrivial()

    mismatched = [g for g in common if predicted[g].n_strokes != gold[g].n_strokes]
    scored = [g for g in common if predicted[g].n_strokes == gold[g].n_strokes]
    gold_only = sorted(gold.keys() - predicted.keys())

    tp = sum(len(sel(predicted[g]) & sel(gold[g])) for g in scored)
    n_pred = sum(len(sel(predicted[g])) for g in scored)
    n_gold = (sum(len(sel(gold[g])) for g in scored)
              + sum(len(sel(gold[g])) for g in gold_only))

    precision = 100.0 * tp / n_pred if n_pred else 100.0
    recall = 100.0 * tp / n_gold if n_gold else 100.0
    f1 = 0.0 if precision + recall == 0 else (
        2.0 * precision * recall / (precision + recall))

    exact_hits = sum(1 for g in scored if sel(predicted[g]) == sel(gold[g]))
    exact_pool = len(scored) + len(gold_only)
    exact = 100.0 * exact_hits / exact_pool if exact_pool else 100.0

    return ScoreReport(
        precision=precision, recall=recall, f1=f1, exact_match=exact,
        n_glyphs=len(scored), n_predicted_spans=n_pred, n_gold_spans=n_gold,
        n_matched_spans=tp,
        n_predicted_only_glyphs=len(predicted.keys() - gold.keys()),
        n_gold_only_glyphs=len(gold_only),
        n_stroke_count_mismatches=len(mismatched),
    )


# ---------------------------------------------------------------------------
# baseline bracketings


@lru_cache(maxsize=None)
def _catalan(n: int) -> int:
    if n <= 1:
        return 1
    return sum(_catalan(i) * _catalan(n - 1 - i) for i in range(n))


def _trees_over(n_leaves: int) -> int:
    return _catalan(n_leaves - 1)


def baseline_tree(n_strokes: int, kind: str, seed: int = 0,
                  glyph_id: str = "") -> SpanTree:
    """Span tree of a reference binary bracketing over n_strokes leaves.

    `left`/`right` are the two comb trees, `balanced` splits at the ceiling
    midpoint, and `random` samples uniformly over all binary bracketings
    (split points weighted by the Catalan counts of the two sides).
    """
    if n_strokes < 1:
        raise ValueError("n_strokes must be >= 1")
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline kind {kind!r}; expected one of {BASELINE_KINDS}")
    spans: set[tuple[int, int]] = {(0, n_strokes)}
    if kind == "left":
        spans.update((0, i) for i in range(2, n_strokes))
    elif kind == "right":
        spans.update((i, n_strokes) for i in range(1, n_strokes - 1))
    elif kind == "balanced":
        def split(a: int, b: int) -> None:
            w = b - a
            if w < 2:
                return
            spans.add((a, b))
            mid = a + (w + 1) // 2
            split(a, mid)
            split(mid, b)
        split(0, n_strokes)
    else:
        rng = random.Random(seed)
        def sample(a: int, b: int) -> None:
            w = b - a
            if w < 2:
                return
            spans.add((a, b))
            total = _trees_over(w)
            pick = rng.randrange(total)
            acc = 0
            for k in range(1, w):
                acc += _trees_over(k) * _trees_over(w - k)
                if pick < acc:
                    sample(a, a + k)
                    sample(a + k, b)
                    return
            raise AssertionError("split-point weights do not sum to the tree count")
        sample(0, n_strokes)
    return SpanTree(glyph_id=glyph_id, n_strokes=n_strokes, spans=frozenset(spans))


def baseline_spans(gold: dict[str, SpanTree], kind: str,
                   seed: int = 0) -> dict[str, SpanTree]:
    """One baseline tree per gold glyph, over that glyph's stroke count.

    The random baseline derives one child seed per glyph so trees differ
    across glyphs but the whole map is reproducible from the single seed.
    """
    out: dict[str, SpanTree] = {}
    for i, (gid, tree) in enumerate(sorted(gold.items())):
        out[gid] = baseline_tree(tree.n_strokes, kind, seed=seed * 1_000_003 + i,
                                 glyph_id=gid)
    return out


# ---------------------------------------------------------------------------
# gold-standard and span file IO


def read_gold_spans(path: str) -> dict[str, SpanTree]:
    """Load gold decompositions from JSON Lines {"id", "n", "spans": [[s,e],...]}."""
    out: dict[str, SpanTree] = {}
    for lineno, rec in read_jsonl(path):
        try:
            gid = rec["id"]
            n = int(rec["n"])
            spans = frozenset((int(s), int(e)) for s, e in rec["spans"])
            spans |= {(0, n)}
            tree = SpanTree(glyph_id=gid, n_strokes=n, spans=spans)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: bad gold record: {exc}") from exc
        if gid in out:
            raise ValueError(f"{path}:{lineno}: duplicate glyph id {gid!r}")
        out[gid] = tree
    return out


def write_spans(path: str, spans: dict[str, SpanTree],
                meta: dict | None = None) -> None:
    records = [
        {"id": t.glyph_id or gid, "n": t.n_strokes,
         "spans": sorted(t.spans, key=lambda p: (p[0], -p[1]))}
        for gid, t in spans.items()
    ]
    write_jsonl(path, records, meta=meta)


# ---------------------------------------------------------------------------
# radical alignment


@dataclass
class RadicalInventory:
    """Expert radical list: (radical id, stroke-name sequence) pairs."""

    entries: list[tuple[str, tuple[str, ...]]]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rid, seq in self.entries:
            if not seq:
                raise ValueError(f"radical {rid!r} has an empty stroke sequence")
            if rid in seen:
                raise ValueError(f"duplicate radical id {rid!r}")
            seen.add(rid)

    def __len__(self) -> int:
        return len(self.entries)


def read_radical_inventory(path: str) -> RadicalInventory:
    """Load radicals from JSON Lines {"id": ..., "strokes": [...]}."""
    entries: list[tuple[str, tuple[str, ...]]] = []
    for lineno, rec in read_jsonl(path):
        try:
            entries.append((rec["id"], tuple(str(s) for s in rec["strokes"])))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad radical record: {exc}") from exc
    return RadicalInventory(entries)


@dataclass
class RadicalAlignment:
    matched: list[tuple[str, str]]
    unmatched: list[str]
    discovered_fraction: float
    nearest_miss: dict[str, tuple[str, int]] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "matched": [list(p) for p in self.matched],
            "unmatched": list(self.unmatched),
            "discovered_fraction": self.discovered_fraction,
            "nearest_miss": {k: [v[0], v[1]] for k, v in self.nearest_miss.items()},
        }


def _edit_distance(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[-1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def align_radicals(library: Library, inventory: RadicalInventory) -> RadicalAlignment:
    """Match radicals to learned functions by body-contributed strokes.

    A radical is discovered when some learned function's body, with every
    parameter instantiated to the empty continuation, contributes exactly the
    radical's stroke sequence; the first such function by definition order is
    reported. Unmatched radicals carry the closest function by edit distance.
    """
    by_seq: dict[tuple[str, ...], str] = {}
    for fn in library.learned:
        seq = library.info(fn.name).contributed
        if seq and seq not in by_seq:
            by_seq[seq] = fn.name
    matched: list[tuple[str, str]] = []
    unmatched: list[str] = []
    nearest: dict[str, tuple[str, int]] = {}
    for rid, seq in inventory.entries:
        hit = by_seq.get(seq)
        if hit is not None:
            matched.append((rid, hit))
            continue
        unmatched.append(rid)
        best: tuple[int, str] | None = None
        for fn in library.learned:
            d = _edit_distance(seq, library.info(fn.name).contributed)
            if best is None or d < best[0]:
                best = (d, fn.name)
        if best is not None:
            nearest[rid] = (best[1], best[0])
    frac = len(matched) / len(inventory) if len(inventory) else 0.0
    return RadicalAlignment(matched=matched, unmatched=unmatched,
                            discovered_fraction=frac, nearest_miss=nearest)

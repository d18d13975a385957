"""Tests for span extraction, scoring, baselines, and radical alignment.

Span sets for the worked three-glyph example are frozen by hand, the scorer
is checked against straight set arithmetic, and the random baseline's
distribution over bracketings is compared with the exact Catalan-uniform law.
"""

import math
import random
from collections import Counter

import pytest

from corpus_gen import random_corpus
from glyphlib import (
    CHINESE_STROKES,
    LIST,
    Abstraction,
    Corpus,
    CostModel,
    ExpansionError,
    LearnConfig,
    Library,
    LibRef,
    RadicalAlignment,
    RadicalInventory,
    ScoreReport,
    SpanTree,
    Var,
    align_radicals,
    baseline_spans,
    baseline_tree,
    corpus_spans,
    expand,
    extract_spans,
    learn_library,
    parse,
    read_gold_spans,
    read_radical_inventory,
    score_spans,
    write_spans,
)
from glyphlib.evaluate import BASELINE_KINDS, SPAN_MODES

LIB0 = Library(CHINESE_STROKES)
MODEL = CostModel()


def toy_learned():
    corpus = Corpus(CHINESE_STROKES, {
        "g0": parse("(list S HZ H H H)", LIB0),
        "g1": parse("(list S HZ SP SWG)", LIB0),
        "g2": parse("(list S HZ H H)", LIB0),
    })
    lib, rw, _ = learn_library(corpus, MODEL, LearnConfig())
    return lib, rw


def tree(gid, n, *spans):
    return SpanTree(glyph_id=gid, n_strokes=n,
                    spans=frozenset(spans) | {(0, n)})


# ---------------------------------------------------------------------------
# span extraction


def test_toy_spans_frozen():
    lib, rw = toy_learned()
    for mode in SPAN_MODES:
        spans = corpus_spans(rw, lib, mode)
        assert spans["g0"].spans == frozenset({(0, 5), (0, 4)})
        assert spans["g1"].spans == frozenset({(0, 4), (0, 2)})
        # g2 is a single bare occurrence: only the trivial full span
        assert spans["g2"].spans == frozenset({(0, 4)})
        assert [spans[g].n_strokes for g in ("g0", "g1", "g2")] == [5, 4, 4]
        assert spans["g0"].glyph_id == "g0"


def test_prefix_capture_separates_modes():
    lib = LIB0.extend(Abstraction("fn_0", 1, parse("(#0 S HZ H)", LIB0)))
    e = parse("(fn_0 (list P))", lib)
    # the subtree interval swallows the argument; the body interval excludes
    # the captured prefix stroke
    assert extract_spans(e, lib, "subtree").spans == frozenset({(0, 4)})
    assert extract_spans(e, lib, "body").spans == frozenset({(0, 4), (1, 4)})
    assert extract_spans(e, lib, "body-contribution").spans == \
        extract_spans(e, lib, "body").spans


def test_occurrences_inside_bodies_do_not_emit_spans():
    lib, rw = toy_learned()
    # fn_1's body uses fn_0, but g0 = (fn_1 H) exposes only fn_1's interval
    spans = extract_spans(rw.entries["g0"], lib, "subtree")
    assert spans.spans == frozenset({(0, 5), (0, 4)})


def test_literal_program_has_only_full_span():
    e = parse("(list H S P)", LIB0)
    for mode in SPAN_MODES:
        assert extract_spans(e, LIB0, mode).spans == frozenset({(0, 3)})


def test_extract_spans_rejects_bad_programs():
    with pytest.raises(ExpansionError):
        extract_spans(LIST, LIB0)  # emits no strokes
    with pytest.raises(ExpansionError):
        extract_spans(Var(0), LIB0)  # unbound variable
    lib = LIB0.extend(Abstraction("fn_0", 1, parse("(#0 S)", LIB0)))
    with pytest.raises(ExpansionError):
        extract_spans(LibRef("fn_0"), lib)  # under-applied


def test_unknown_mode_rejected():
    with pytest.raises(ValueError, match="span mode"):
        extract_spans(parse("(list H)", LIB0), LIB0, "bogus")


@pytest.mark.parametrize("seed", range(0, 12))
@pytest.mark.parametrize("mode", SPAN_MODES)
def test_learner_output_spans_are_laminar_and_sized(seed, mode):
    corpus = random_corpus(seed)
    lib, rw, _ = learn_library(corpus, MODEL, LearnConfig())
    spans = corpus_spans(rw, lib, mode)  # constructor enforces laminarity
    for gid, t in spans.items():
        assert t.n_strokes == len(expand(corpus.entries[gid], LIB0))
        assert (0, t.n_strokes) in t.spans


# ---------------------------------------------------------------------------
# span-tree validation


def test_span_tree_validation():
    with pytest.raises(ValueError):
        SpanTree("g", 0, frozenset())
    with pytest.raises(ValueError, match="full span"):
        SpanTree("g", 3, frozenset({(0, 2)}))
    with pytest.raises(ValueError, match="out of bounds"):
        SpanTree("g", 3, frozenset({(0, 3), (1, 4)}))
    with pytest.raises(ValueError, match="out of bounds"):
        SpanTree("g", 3, frozenset({(0, 3), (2, 2)}))
    with pytest.raises(ValueError, match="cross"):
        SpanTree("g", 4, frozenset({(0, 4), (0, 2), (1, 3)}))
    t = tree("g", 4, (0, 2), (2, 4))
    assert t.nontrivial() == frozenset({(0, 2), (2, 4)})


# ---------------------------------------------------------------------------
# scoring


def test_score_identical_is_perfect():
    pred = {"g0": tree("g0", 5, (0, 4))}
    rep = score_spans(pred, pred)
    assert (rep.precision, rep.recall, rep.f1, rep.exact_match) == \
        (100.0, 100.0, 100.0, 100.0)
    assert rep.n_glyphs == 1 and rep.n_matched_spans == 1


def test_score_frozen_two_glyph_example():
    pred = {"g0": tree("g0", 4, (0, 2)), "g1": tree("g1", 3, (0, 2))}
    gold = {"g0": tree("g0", 4, (2, 4)), "g1": tree("g1", 3, (0, 2))}
    rep = score_spans(pred, gold)
    assert (rep.precision, rep.recall, rep.f1) == (50.0, 50.0, 50.0)
    assert rep.exact_match == 50.0
    assert (rep.n_predicted_spans, rep.n_gold_spans, rep.n_matched_spans) == (2, 2, 1)


def test_score_counts_gold_only_glyphs_against_recall():
    pred = {"g0": tree("g0", 4, (0, 2)), "g1": tree("g1", 3, (0, 2))}
    gold = {"g0": tree("g0", 4, (2, 4)), "g1": tree("g1", 3, (0, 2)),
            "g2": tree("g2", 3, (1, 3))}
    rep = score_spans(pred, gold)
    assert rep.precision == 50.0
    assert rep.recall == pytest.approx(100.0 / 3.0)
    assert rep.f1 == pytest.approx(40.0)
    assert rep.exact_match == pytest.approx(100.0 / 3.0)
    assert rep.n_gold_only_glyphs == 1


def test_score_excludes_predicted_only_and_mismatched_glyphs():
    pred = {"g0": tree("g0", 4, (0, 2)),
            "g1": tree("g1", 5, (0, 2)),   # gold says 3 strokes
            "g9": tree("g9", 2)}           # not in gold
    gold = {"g0": tree("g0", 4, (0, 2)), "g1": tree("g1", 3, (0, 2))}
    rep = score_spans(pred, gold)
    assert rep.n_predicted_only_glyphs == 1
    assert rep.n_stroke_count_mismatches == 1
    assert rep.n_glyphs == 1
    assert (rep.precision, rep.recall) == (100.0, 100.0)


def test_score_full_span_toggle():
    pred = {"g0": tree("g0", 4)}
    gold = {"g0": tree("g0", 4, (0, 2))}
    lax = score_spans(pred, gold, include_full_span=True)
    strict = score_spans(pred, gold)
    assert lax.n_matched_spans == 1 and lax.precision == 100.0
    assert strict.n_predicted_spans == 0 and strict.precision == 100.0
    assert strict.recall == 0.0 and strict.f1 == 0.0


def test_score_requires_shared_ids():
    with pytest.raises(ValueError, match="share no glyph ids"):
        score_spans({"a": tree("a", 2)}, {"b": tree("b", 2)})


def _random_laminar(rng, gid, n):
    base = baseline_tree(n, "random", seed=rng.randrange(10**9), glyph_id=gid)
    kept = frozenset(s for s in base.nontrivial() if rng.random() < 0.6)
    return SpanTree(glyph_id=gid, n_strokes=n, spans=kept | {(0, n)})


@pytest.mark.parametrize("seed", range(25))
def test_score_matches_set_arithmetic(seed):
    rng = random.Random(seed)
    ids = [f"g{i}" for i in range(rng.randint(1, 6))]
    sizes = {g: rng.randint(1, 10) for g in ids}
    pred = {g: _random_laminar(rng, g, sizes[g]) for g in ids}
    gold = {g: _random_laminar(rng, g, sizes[g]) for g in ids}
    rep = score_spans(pred, gold)

    tp = sum(len(pred[g].nontrivial() & gold[g].nontrivial()) for g in ids)
    np_ = sum(len(pred[g].nontrivial()) for g in ids)
    ng = sum(len(gold[g].nontrivial()) for g in ids)
    p = 100.0 * tp / np_ if np_ else 100.0
    r = 100.0 * tp / ng if ng else 100.0
    f = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    exact = 100.0 * sum(pred[g].nontrivial() == gold[g].nontrivial()
                        for g in ids) / len(ids)
    assert rep.precision == pytest.approx(p, abs=1e-9)
    assert rep.recall == pytest.approx(r, abs=1e-9)
    assert rep.f1 == pytest.approx(f, abs=1e-9)
    assert rep.exact_match == pytest.approx(exact, abs=1e-9)


def test_report_as_dict_round_trip():
    rep = score_spans({"g": tree("g", 3, (0, 2))}, {"g": tree("g", 3, (0, 2))})
    d = rep.as_dict()
    assert d["f1"] == 100.0 and d["n_glyphs"] == 1
    assert set(d) == {
        "precision", "recall", "f1", "exact_match", "n_glyphs",
        "n_predicted_spans", "n_gold_spans", "n_matched_spans",
        "n_predicted_only_glyphs", "n_gold_only_glyphs",
        "n_stroke_count_mismatches"}


# ---------------------------------------------------------------------------
# baselines


def test_baseline_trees_frozen_n4():
    assert baseline_tree(4, "right").spans == \
        frozenset({(0, 4), (1, 4), (2, 4)})
    assert baseline_tree(4, "left").spans == \
        frozenset({(0, 4), (0, 3), (0, 2)})
    assert baseline_tree(4, "balanced").spans == \
        frozenset({(0, 4), (0, 2), (2, 4)})
    assert baseline_tree(5, "balanced").spans == \
        frozenset({(0, 5), (0, 3), (0, 2), (3, 5)})


def test_baseline_edge_sizes():
    for kind in BASELINE_KINDS:
        assert baseline_tree(1, kind).spans == frozenset({(0, 1)})
        assert baseline_tree(2, kind).spans == frozenset({(0, 2)})
    with pytest.raises(ValueError):
        baseline_tree(0, "left")
    with pytest.raises(ValueError):
        baseline_tree(4, "middle")


def test_baseline_binary_span_counts():
    # a full binary bracketing over n leaves has n-1 internal nodes, of which
    # those of width >= 2 appear as spans
    for n in range(2, 9):
        for kind in ("left", "right", "balanced"):
            t = baseline_tree(n, kind)
            assert len(t.spans) == n - 1
        for seed in range(5):
            assert len(baseline_tree(n, "random", seed=seed).spans) <= n - 1


def _catalan(n):
    return math.comb(2 * n, n) // (n + 1)


@pytest.mark.parametrize("n,samples", [(4, 5000), (5, 14000), (6, 42000)])
def test_random_baseline_is_catalan_uniform(n, samples):
    counts = Counter(baseline_tree(n, "random", seed=s).spans
                     for s in range(samples))
    n_trees = _catalan(n - 1)
    assert len(counts) == n_trees
    tvd = 0.5 * sum(abs(c / samples - 1.0 / n_trees) for c in counts.values())
    assert tvd < 0.02


def test_random_baseline_deterministic_in_seed():
    a = baseline_tree(9, "random", seed=7)
    b = baseline_tree(9, "random", seed=7)
    assert a.spans == b.spans


def test_baseline_spans_per_glyph():
    gold = {"g0": tree("g0", 4, (0, 2)), "g1": tree("g1", 6, (0, 3))}
    out = baseline_spans(gold, "balanced")
    assert set(out) == {"g0", "g1"}
    assert out["g0"].n_strokes == 4 and out["g1"].n_strokes == 6
    assert out["g0"].spans == frozenset({(0, 4), (0, 2), (2, 4)})
    r1 = baseline_spans(gold, "random", seed=3)
    r2 = baseline_spans(gold, "random", seed=3)
    assert {g: t.spans for g, t in r1.items()} == \
        {g: t.spans for g, t in r2.items()}


# ---------------------------------------------------------------------------
# file round-trips


def test_span_file_round_trip(tmp_path):
    lib, rw = toy_learned()
    spans = corpus_spans(rw, lib)
    path = str(tmp_path / "spans.jsonl")
    write_spans(path, spans, meta={"mode": "subtree"})
    back = read_gold_spans(path)
    assert {g: (t.n_strokes, t.spans) for g, t in back.items()} == \
        {g: (t.n_strokes, t.spans) for g, t in spans.items()}


def test_read_gold_spans_errors(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"id": "g0", "n": 3, "spans": [[0, 3]]}\n'
                 '{"n": 2, "spans": []}\n')
    with pytest.raises(ValueError, match=r"bad\.jsonl:2"):
        read_gold_spans(str(p))
    p.write_text('{"id": "g0", "n": 3, "spans": []}\n'
                 '{"id": "g0", "n": 2, "spans": []}\n')
    with pytest.raises(ValueError, match="duplicate glyph id"):
        read_gold_spans(str(p))
    p.write_text('{"id": "g0", "n": 4, "spans": [[0, 2], [1, 3]]}\n')
    with pytest.raises(ValueError, match="cross"):
        read_gold_spans(str(p))


def test_read_gold_spans_adds_full_span(tmp_path):
    p = tmp_path / "g.jsonl"
    p.write_text('{"id": "g0", "n": 3, "spans": [[0, 2]]}\n')
    got = read_gold_spans(str(p))
    assert got["g0"].spans == frozenset({(0, 3), (0, 2)})


# ---------------------------------------------------------------------------
# radical alignment


def test_align_radicals_toy():
    lib, _ = toy_learned()
    inv = RadicalInventory([
        ("rad_a", ("S", "HZ")),
        ("rad_b", ("S", "HZ", "H", "H")),
        ("rad_c", ("P", "P", "P")),
    ])
    out = align_radicals(lib, inv)
    assert out.matched == [("rad_a", "fn_0"), ("rad_b", "fn_1")]
    assert out.unmatched == ["rad_c"]
    assert out.discovered_fraction == pytest.approx(2.0 / 3.0)
    assert out.nearest_miss == {"rad_c": ("fn_0", 3)}
    d = out.as_dict()
    assert d["matched"] == [["rad_a", "fn_0"], ["rad_b", "fn_1"]]
    assert d["nearest_miss"] == {"rad_c": ["fn_0", 3]}


def test_align_radicals_prefers_earliest_definition():
    lib = LIB0.extend(Abstraction("fn_0", 0, parse("(list S HZ)", LIB0)))
    lib = lib.extend(Abstraction("fn_1", 1, parse("(fn_0 #0)", lib)))
    # both functions contribute (S, HZ); the earlier definition wins
    out = align_radicals(lib, RadicalInventory([("rad", ("S", "HZ"))]))
    assert out.matched == [("rad", "fn_0")]


def test_align_radicals_empty_cases():
    out = align_radicals(Library(CHINESE_STROKES), RadicalInventory([]))
    assert out.matched == [] and out.discovered_fraction == 0.0
    lib, _ = toy_learned()
    out = align_radicals(lib, RadicalInventory([]))
    assert out.discovered_fraction == 0.0


def test_radical_inventory_validation():
    with pytest.raises(ValueError, match="empty stroke sequence"):
        RadicalInventory([("r", ())])
    with pytest.raises(ValueError, match="duplicate radical id"):
        RadicalInventory([("r", ("H",)), ("r", ("S",))])


def test_read_radical_inventory(tmp_path):
    p = tmp_path / "rads.jsonl"
    p.write_text('{"id": "r1", "strokes": ["S", "HZ"]}\n'
                 '{"id": "r2", "strokes": ["H"]}\n')
    inv = read_radical_inventory(str(p))
    assert inv.entries == [("r1", ("S", "HZ")), ("r2", ("H",))]
    assert len(inv) == 2
    p.write_text('{"strokes": ["S"]}\n')
    with pytest.raises(ValueError, match=r"rads\.jsonl:1"):
        read_radical_inventory(str(p))

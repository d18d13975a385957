"""Tests for complexity reports and cross-corpus comparisons.

Every quantity for the worked three-glyph example is frozen as an exact
fraction; comparisons are checked for identity-zeroing, id alignment, and
CSV round-tripping.
"""

import csv

import pytest

from glyphlib import (
    CHINESE_STROKES,
    ComplexityReport,
    Corpus,
    CostModel,
    LearnConfig,
    Library,
    PrimitiveAlphabet,
    complexity_report,
    diachronic_compare,
    learn_library,
    parse,
    script_pair_compare,
    write_reports_csv,
)
from glyphlib.metrics import REPORT_COLUMNS

LIB0 = Library(CHINESE_STROKES)
MODEL = CostModel()


def toy_corpus() -> Corpus:
    return Corpus(CHINESE_STROKES, {
        "g0": parse("(list S HZ H H H)", LIB0),
        "g1": parse("(list S HZ SP SWG)", LIB0),
        "g2": parse("(list S HZ H H)", LIB0),
    })


def learned_report(corpus, corpus_id=""):
    lib, rw, _ = learn_library(corpus, MODEL, LearnConfig())
    return complexity_report(corpus, lib, rw, MODEL, corpus_id=corpus_id)


def test_toy_report_frozen():
    rep = learned_report(toy_corpus(), corpus_id="toy")
    assert rep.corpus_id == "toy"
    assert rep.n_glyphs == 3
    assert rep.dl_base == 1613
    assert rep.dl_star == 603
    assert rep.library_dl == 604
    assert rep.c_of_w == 1207
    assert rep.library_size == 36  # 33 stroke types + sequence head + 2 learned
    assert rep.learned_count == 2
    assert rep.compression_ratio == pytest.approx(1613 / 603)
    # per-glyph symbol-count ratios: 6/2, 5/3, 5/1 -> mean 29/9
    assert rep.per_char_function_ratio == pytest.approx(29 / 9)
    # without the sequence head: 5/2, 4/3, 4/1 -> mean 47/18
    assert rep.per_char_function_ratio_no_list == pytest.approx(47 / 18)


def test_report_as_dict_matches_columns():
    rep = learned_report(toy_corpus())
    d = rep.as_dict()
    assert tuple(d.keys()) == REPORT_COLUMNS
    assert d["c_of_w"] == d["dl_star"] + d["library_dl"]


def test_report_on_unlearnable_corpus_is_identity():
    corpus = Corpus(CHINESE_STROKES, {
        "g0": parse("(list H T)", LIB0),
        "g1": parse("(list S ST)", LIB0),
    })
    rep = learned_report(corpus)
    assert rep.dl_base == rep.dl_star == rep.c_of_w
    assert rep.learned_count == 0
    assert rep.compression_ratio == 1.0
    assert rep.per_char_function_ratio == 1.0


def test_report_insensitive_to_entry_order():
    corpus = toy_corpus()
    lib, rw, _ = learn_library(corpus, MODEL, LearnConfig())
    ids = list(corpus.entries)
    corpus_r = Corpus(CHINESE_STROKES,
                      {g: corpus.entries[g] for g in reversed(ids)})
    rw_r = Corpus(CHINESE_STROKES, {g: rw.entries[g] for g in reversed(ids)})
    a = complexity_report(corpus, lib, rw, MODEL).as_dict()
    b = complexity_report(corpus_r, lib, rw_r, MODEL).as_dict()
    assert a == b


def test_repetition_raises_compression_ratio():
    varied = Corpus(CHINESE_STROKES, {
        "g0": parse("(list S HZ)", LIB0),
        "g1": parse("(list P N)", LIB0),
    })
    repetitive = Corpus(CHINESE_STROKES, {
        "g0": parse("(list S HZ)", LIB0),
        "g1": parse("(list S HZ)", LIB0),
        "g2": parse("(list S HZ)", LIB0),
    })
    assert learned_report(varied).compression_ratio == 1.0
    assert learned_report(repetitive).compression_ratio > 1.0


def test_report_validation():
    corpus = toy_corpus()
    lib, rw, _ = learn_library(corpus, MODEL, LearnConfig())
    other = Corpus(CHINESE_STROKES, {"zz": parse("(list H)", LIB0)})
    with pytest.raises(ValueError, match="different glyph ids"):
        complexity_report(corpus, lib, other, MODEL)
    empty = Corpus(CHINESE_STROKES, {})
    with pytest.raises(ValueError, match="empty corpus"):
        complexity_report(empty, lib, empty, MODEL)


# ---------------------------------------------------------------------------
# pairwise comparison


def test_pair_compare_zero_on_identical():
    corpus = toy_corpus()
    cmp = script_pair_compare(corpus, corpus, MODEL, LearnConfig(),
                              a_id="x", b_id="y")
    assert cmp.n_aligned == 3
    assert cmp.dl_base_pct_diff == 0.0
    assert cmp.dl_star_pct_diff == 0.0
    assert cmp.ratio_diff == 0.0
    assert cmp.ratio_a == cmp.ratio_b
    assert cmp.a_report is not None and cmp.b_report is not None
    assert cmp.a_report.corpus_id == "x"


def test_pair_compare_restricts_to_shared_ids():
    a = Corpus(CHINESE_STROKES, {
        "g0": parse("(list S HZ H H H)", LIB0),
        "g1": parse("(list S HZ SP SWG)", LIB0),
        "only_a": parse("(list T)", LIB0),
    })
    b = Corpus(CHINESE_STROKES, {
        "g0": parse("(list S HZ)", LIB0),
        "g1": parse("(list S HZ)", LIB0),
        "only_b": parse("(list N N N N)", LIB0),
    })
    cmp = script_pair_compare(a, b, MODEL, LearnConfig())
    assert cmp.n_aligned == 2
    assert cmp.a_report.n_glyphs == 2 and cmp.b_report.n_glyphs == 2
    # the unshared glyphs must not leak into the aggregates
    assert cmp.a_report.dl_base == 605 + 504
    assert cmp.b_report.dl_base == 302 + 302


def test_pair_compare_signs_and_magnitudes():
    a = Corpus(CHINESE_STROKES, {"g0": parse("(list H H H H)", LIB0)})
    b = Corpus(CHINESE_STROKES, {"g0": parse("(list H H)", LIB0)})
    cmp = script_pair_compare(a, b, MODEL, LearnConfig())
    # dl_base: a=504, b=302 -> (504-302)/302
    assert cmp.dl_base_pct_diff == pytest.approx(100.0 * 202 / 302)
    d = cmp.as_dict()
    assert d["n_aligned"] == 1 and "a_report" in d and "b_report" in d


def test_pair_compare_needs_alignment():
    a = Corpus(CHINESE_STROKES, {"g0": parse("(list H)", LIB0)})
    b = Corpus(CHINESE_STROKES, {"g1": parse("(list H)", LIB0)})
    with pytest.raises(ValueError, match="aligned glyph id"):
        script_pair_compare(a, b, MODEL, LearnConfig())
    with pytest.raises(ValueError, match="need at least 4"):
        script_pair_compare(toy_corpus(), toy_corpus(), MODEL, LearnConfig(),
                            min_aligned=4)


# ---------------------------------------------------------------------------
# diachronic tables


def test_diachronic_rows_and_pairwise():
    early = toy_corpus()
    late = Corpus(CHINESE_STROKES, {
        "g0": parse("(list S HZ)", LIB0),
        "g1": parse("(list S HZ)", LIB0),
        "g2": parse("(list H)", LIB0),
    })
    table = diachronic_compare([("early", early), ("late", late)],
                               MODEL, LearnConfig())
    assert [sid for sid, _ in table.rows] == ["early", "late"]
    assert len(table.pairwise) == 1
    p = table.pairwise[0]
    assert (p.a_id, p.b_id) == ("early", "late")
    a_rep, b_rep = table.rows[0][1], table.rows[1][1]
    assert p.dl_base_pct_diff == pytest.approx(
        100.0 * (a_rep.dl_base - b_rep.dl_base) / b_rep.dl_base)
    assert p.ratio_diff == pytest.approx(
        a_rep.compression_ratio - b_rep.compression_ratio)
    d = table.as_dict()
    assert [r["script"] for r in d["rows"]] == ["early", "late"]


def test_diachronic_requires_two_corpora():
    with pytest.raises(ValueError, match="at least two"):
        diachronic_compare([("only", toy_corpus())], MODEL, LearnConfig())


def test_diachronic_warns_on_alphabet_size_mismatch():
    small = PrimitiveAlphabet(("A", "B"))
    lib_small = Library(small)
    other = Corpus(small, {"g0": parse("(list A B)", lib_small)})
    with pytest.warns(UserWarning, match="alphabet sizes differ"):
        diachronic_compare([("a", toy_corpus()), ("b", other)],
                           MODEL, LearnConfig())


# ---------------------------------------------------------------------------
# CSV output


def test_reports_csv_round_trip(tmp_path):
    reps = [learned_report(toy_corpus(), corpus_id="toy"),
            learned_report(Corpus(CHINESE_STROKES, {
                "g0": parse("(list H T)", LIB0),
                "g1": parse("(list S ST)", LIB0),
            }), corpus_id="flat")]
    path = tmp_path / "reports.csv"
    write_reports_csv(str(path), reps)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["corpus_id"] for r in rows] == ["toy", "flat"]
    assert tuple(rows[0].keys()) == REPORT_COLUMNS
    for rep, row in zip(reps, rows):
        for k in ("dl_base", "dl_star", "library_dl", "c_of_w",
                  "library_size", "learned_count", "n_glyphs"):
            assert int(row[k]) == getattr(rep, k)
        for k in ("compression_ratio", "per_char_function_ratio",
                  "per_char_function_ratio_no_list"):
            assert float(row[k]) == pytest.approx(getattr(rep, k))

"""Writing-system complexity quantities and cross-corpus comparisons.

The complexity of a corpus under a library is the total description length of
its rewritten programs plus the description length of the learned bodies; the
report also carries the compression ratio against the base alphabet and the
mean per-glyph reduction in symbol count. Comparisons run the learner
independently per corpus and contrast the resulting reports, either along an
ordered sequence of script stages or pairwise on aligned glyph ids.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

from .fileio import atomic_write_text
from .lang import Corpus, CostModel, Library, cost, leaf_count
from .learn import LearnConfig, LearnTrace, learn_library

__all__ = [
    "ComplexityReport", "DiachronicTable", "PairComparison",
    "complexity_report", "diachronic_compare", "script_pair_compare",
    "write_reports_csv", "REPORT_COLUMNS",
]

REPORT_COLUMNS = (
    "corpus_id", "n_glyphs", "dl_base", "dl_star", "library_dl", "c_of_w",
    "library_size", "learned_count", "compression_ratio",
    "per_char_function_ratio", "per_char_function_ratio_no_list",
)


@dataclass
class ComplexityReport:
    corpus_id: str
    n_glyphs: int
    dl_base: int
    dl_star: int
    library_dl: int
    c_of_w: int
    library_size: int
    learned_count: int
    compression_ratio: float
    per_char_function_ratio: float
    per_char_function_ratio_no_list: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in REPORT_COLUMNS}


def complexity_report(corpus: Corpus, learned: Library, rewritten: Corpus,
                      model: CostModel,
                      corpus_id: str = "") -> ComplexityReport:
    """Complexity quantities for a corpus rewritten under a learned library.

    dl_base is the description length of the literal programs, dl_star of the
    rewritten ones, and c_of_w = dl_star + library_dl is the minimized
    objective. Symbol counts per glyph are reported both with and without the
    sequence-head token.
    """
    if corpus.entries.keys() != rewritten.entries.keys():
        raise ValueError("corpus and rewritten corpus have different glyph ids")
    if not corpus.entries:
        raise ValueError("empty corpus")

    dl_base = sum(cost(e, model) for e in corpus.entries.values())
    dl_star = sum(cost(e, model) for e in rewritten.entries.values())
    lib_dl = sum(cost(fn.body, model) for fn in learned.learned)

    ratios: list[float] = []
    ratios_nl: list[float] = []
    for gid, base_e in corpus.entries.items():
        star_e = rewritten.entries[gid]
        ratios.append(leaf_count(base_e) / leaf_count(star_e))
        nl_star = leaf_count(star_e, include_list=False)
        ratios_nl.append(
            leaf_count(base_e, include_list=False) / max(nl_star, 1))

    n = len(corpus.entries)
    return ComplexityReport(
        corpus_id=corpus_id,
        n_glyphs=n,
        dl_base=dl_base,
        dl_star=dl_star,
        library_dl=lib_dl,
        c_of_w=dl_star + lib_dl,
        library_size=learned.base.size + 1 + len(learned.learned),
        learned_count=len(learned.learned),
        compression_ratio=dl_base / dl_star,
        per_char_function_ratio=sum(ratios) / n,
        per_char_function_ratio_no_list=sum(ratios_nl) / n,
    )


@dataclass
class PairComparison:
    """Aggregate differences between two independently learned corpora.

    Percent differences are (a - b) / b, i.e. relative to the second corpus.
    """

    a_id: str
    b_id: str
    n_aligned: int
    dl_base_pct_diff: float
    dl_star_pct_diff: float
    ratio_a: float
    ratio_b: float
    ratio_diff: float
    a_report: ComplexityReport | None = None
    b_report: ComplexityReport | None = None

    def as_dict(self) -> dict:
        out = {
            "a_id": self.a_id, "b_id": self.b_id, "n_aligned": self.n_aligned,
            "dl_base_pct_diff": self.dl_base_pct_diff,
            "dl_star_pct_diff": self.dl_star_pct_diff,
            "ratio_a": self.ratio_a, "ratio_b": self.ratio_b,
            "ratio_diff": self.ratio_diff,
        }
        if self.a_report is not None:
            out["a_report"] = self.a_report.as_dict()
        if self.b_report is not None:
            out["b_report"] = self.b_report.as_dict()
        return out


@dataclass
class DiachronicTable:
    rows: list[tuple[str, ComplexityReport]]
    pairwise: list[PairComparison] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "rows": [{"script": sid, **rep.as_dict()} for sid, rep in self.rows],
            "pairwise": [p.as_dict() for p in self.pairwise],
        }


def _pct(a: float, b: float) -> float:
    return 100.0 * (a - b) / b


def _compare(a_id: str, a_rep: ComplexityReport, b_id: str,
             b_rep: ComplexityReport, n_aligned: int,
             keep_reports: bool = False) -> PairComparison:
    return PairComparison(
        a_id=a_id, b_id=b_id, n_aligned=n_aligned,
        dl_base_pct_diff=_pct(a_rep.dl_base, b_rep.dl_base),
        dl_star_pct_diff=_pct(a_rep.dl_star, b_rep.dl_star),
        ratio_a=a_rep.compression_ratio, ratio_b=b_rep.compression_ratio,
        ratio_diff=a_rep.compression_ratio - b_rep.compression_ratio,
        a_report=a_rep if keep_reports else None,
        b_report=b_rep if keep_reports else None,
    )


def _learn_report(sid: str, corpus: Corpus, model: CostModel,
                  config: LearnConfig) -> tuple[ComplexityReport, LearnTrace]:
    lib, rw, trace = learn_library(corpus, model, config)
    return complexity_report(corpus, lib, rw, model, corpus_id=sid), trace


def diachronic_compare(corpora: list[tuple[str, Corpus]],
                       model: CostModel = CostModel(),
                       config: LearnConfig = LearnConfig()) -> DiachronicTable:
    """Independent learning runs over an epoch-ordered list of corpora.

    Emits one complexity report per script, in the given order, plus a
    comparison of each consecutive pair (earlier relative to later). Scripts
    are expected to use equally sized alphabets; a mismatch only warns.
    """
    if len(corpora) < 2:
        raise ValueError("need at least two corpora to compare")
    sizes = {sid: c.alphabet.size for sid, c in corpora}
    if len(set(sizes.values())) > 1:
        warnings.warn(f"alphabet sizes differ across scripts: {sizes}")
    rows = [(sid, _learn_report(sid, c, model, config)[0]) for sid, c in corpora]
    pairwise = [
        _compare(rows[i][0], rows[i][1], rows[i + 1][0], rows[i + 1][1],
                 n_aligned=0)
        for i in range(len(rows) - 1)
    ]
    return DiachronicTable(rows=rows, pairwise=pairwise)


def script_pair_compare(a: Corpus, b: Corpus,
                        model: CostModel = CostModel(),
                        config: LearnConfig = LearnConfig(),
                        a_id: str = "a", b_id: str = "b",
                        min_aligned: int = 1) -> PairComparison:
    """Compare two scripts on their shared glyph ids.

    Both corpora are restricted to the ids they share, each restricted corpus
    gets its own independent learning run, and aggregate description lengths
    are contrasted with percent differences relative to the second corpus.
    """
    shared = sorted(a.entries.keys() & b.entries.keys())
    if len(shared) < min_aligned:
        raise ValueError(
            f"only {len(shared)} aligned glyph id(s); need at least {min_aligned}")
    a_sub = Corpus(a.alphabet, {g: a.entries[g] for g in shared})
    b_sub = Corpus(b.alphabet, {g: b.entries[g] for g in shared})
    a_rep, _ = _learn_report(a_id, a_sub, model, config)
    b_rep, _ = _learn_report(b_id, b_sub, model, config)
    return _compare(a_id, a_rep, b_id, b_rep, n_aligned=len(shared),
                    keep_reports=True)


def write_reports_csv(path: str, reports: list[ComplexityReport]) -> None:
    """One CSV row per report, columns in REPORT_COLUMNS order."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(REPORT_COLUMNS))
    writer.writeheader()
    for rep in reports:
        writer.writerow(rep.as_dict())
    atomic_write_text(path, buf.getvalue())

"""Stroke-sequence program library learning and evaluation.

Glyphs are flat stroke sequences encoded as programs over a stroke alphabet;
a greedy MDL learner extracts a reusable library of abstractions, rewriting
drives segmentation, and reports cover compression, usage, and structure.
"""

from .lang import (
    LIST, MARK, Abstraction, App, ArityError, Corpus, CostModel, ExpansionError,
    Expr, LibRef, Library, ListHead, ParseError, Prim, PrimitiveAlphabet, Var,
    CHINESE_STROKES, cost, expand, format_abstraction, leaf_count, parse,
    read_library, render, spine, tokens, validate_program, write_library,
)
from .rewrite import rewrite, rewrite_corpus_entries, rewrite_tokens
from .learn import (
    CandidateAbstraction, HierarchyStats, LearnConfig, LearnStep, LearnTrace,
    UsageStat, best_abstraction, hierarchy_stats, learn_library, usage_counts,
)
from .evaluate import (
    RadicalAlignment, RadicalInventory, ScoreReport, SpanTree, align_radicals,
    baseline_spans, baseline_tree, corpus_spans, extract_spans,
    read_gold_spans, read_radical_inventory, score_spans, write_spans,
)
from .metrics import (
    ComplexityReport, DiachronicTable, PairComparison, complexity_report,
    diachronic_compare, script_pair_compare, write_reports_csv,
)
from .ingest import (
    BezierStroke, DerivedAlphabet, Trajectory, cluster_strokes, encode_corpus,
    fit_bezier, load_canonical, load_corpus, read_alphabet, read_trajectories,
    stroke_features, write_alphabet, write_corpus,
)
from .estimators import LibraryLearner, StrokeClusterer

__version__ = "0.1.0"

"""Estimator-style wrappers around library learning and stroke clustering.

Both classes follow the scikit-learn protocol — constructor keyword
parameters, `fit` populating trailing-underscore attributes, `get_params` /
`set_params` — so they compose with model-selection and pipeline tooling.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .ingest import (
    BezierStroke, DerivedAlphabet, Trajectory, cluster_strokes, fit_bezier,
    stroke_features,
)
from .lang import (
    CHINESE_STROKES, Corpus, CostModel, Library, PrimitiveAlphabet, expand,
    parse,
)
from .learn import LearnConfig, learn_library
from .rewrite import rewrite_corpus_entries

__all__ = ["LibraryLearner", "StrokeClusterer"]


class LibraryLearner(BaseEstimator, TransformerMixin):
    """Learn a compressive function library from a corpus of glyph programs.

    Parameters mirror the cost model and search configuration: terminal_cost
    and application_cost set the description-length weights, max_arity bounds
    abstraction parameters, max_iterations caps the greedy loop,
    shortlist_size controls how many mined candidates get exact evaluation,
    and n_threads parallelizes corpus rewriting (results are identical for
    any thread count).

    After `fit`: `library_` holds the learned library, `rewritten_` the
    corpus rewritten under it, and `trace_` the per-iteration record.
    """

    def __init__(self, terminal_cost: int = 100, application_cost: int = 1,
                 max_arity: int = 3, max_iterations: int = 10_000,
                 shortlist_size: int = 16, n_threads: int = 1,
                 alphabet: PrimitiveAlphabet | None = None):
        self.terminal_cost = terminal_cost
        self.application_cost = application_cost
        self.max_arity = max_arity
        self.max_iterations = max_iterations
        self.shortlist_size = shortlist_size
        self.n_threads = n_threads
        self.alphabet = alphabet

    def _model(self) -> CostModel:
        return CostModel(terminal_cost=self.terminal_cost,
                         application_cost=self.application_cost)

    def _config(self) -> LearnConfig:
        return LearnConfig(max_arity=self.max_arity,
                           max_iterations=self.max_iterations,
                           shortlist_size=self.shortlist_size,
                           threads=self.n_threads)

    def _as_corpus(self, X) -> Corpus:
        if isinstance(X, Corpus):
            return X
        alphabet = self.alphabet if self.alphabet is not None else CHINESE_STROKES
        base = Library(alphabet)
        if isinstance(X, Mapping):
            entries = {gid: (parse(e, base) if isinstance(e, str) else e)
                       for gid, e in X.items()}
        elif isinstance(X, Sequence) and not isinstance(X, (str, bytes)):
            entries = {}
            for i, e in enumerate(X):
                if not isinstance(e, str):
                    raise TypeError(
                        "sequence input must contain program strings; pass a "
                        "Corpus or an id->program mapping for parsed terms")
                entries[f"g{i:04d}"] = parse(e, base)
        else:
            raise TypeError(
                f"cannot build a corpus from {type(X).__name__}; expected a "
                "Corpus, an id->program mapping, or a sequence of program strings")
        return Corpus(alphabet, entries)

    def fit(self, X, y=None):
        corpus = self._as_corpus(X)
        lib, rewritten, trace = learn_library(corpus, self._model(), self._config())
        self.library_ = lib
        self.rewritten_ = rewritten
        self.trace_ = trace
        return self

    def transform(self, X) -> Corpus:
        """Rewrite programs to their cheapest form under the fitted library."""
        if not hasattr(self, "library_"):
            raise RuntimeError("this LibraryLearner instance is not fitted yet")
        corpus = self._as_corpus(X)
        entries = rewrite_corpus_entries(corpus.entries, self.library_,
                                         self._model(), threads=self.n_threads)
        return Corpus(corpus.alphabet, entries)

    def inverse_transform(self, X: Corpus) -> Corpus:
        """Expand rewritten programs back to literal stroke-sequence programs."""
        if not hasattr(self, "library_"):
            raise RuntimeError("this LibraryLearner instance is not fitted yet")
        base = Library(X.alphabet)
        entries = {
            gid: parse("(list " + " ".join(expand(e, self.library_)) + ")", base)
            for gid, e in X.entries.items()
        }
        return Corpus(X.alphabet, entries)


class StrokeClusterer(BaseEstimator):
    """Derive a fixed-size stroke alphabet by clustering Bézier fits.

    Accepts trajectories, raw polylines, fitted strokes, or a ready (n, 8)
    feature matrix. After `fit`: `centroids_`, `labels_`, `inertia_`, and
    `alphabet_` (the DerivedAlphabet usable with encode_corpus).
    """

    def __init__(self, n_clusters: int = 33, random_state: int = 0,
                 n_restarts: int = 10, max_iter: int = 300):
        self.n_clusters = n_clusters
        self.random_state = random_state
        self.n_restarts = n_restarts
        self.max_iter = max_iter

    def _as_strokes(self, X) -> list[BezierStroke]:
        if isinstance(X, np.ndarray):
            if X.ndim != 2 or X.shape[1] != 8:
                raise ValueError("feature arrays must have shape (n, 8)")
            return [BezierStroke(control=row.reshape(4, 2), residual=0.0)
                    for row in X]
        strokes: list[BezierStroke] = []
        for item in X:
            if isinstance(item, BezierStroke):
                strokes.append(item)
            elif isinstance(item, Trajectory):
                strokes.extend(fit_bezier(s) for s in item.strokes)
            else:
                strokes.append(fit_bezier(np.asarray(item, dtype=float)))
        return strokes

    def fit(self, X, y=None):
        strokes = self._as_strokes(X)
        alphabet = cluster_strokes(strokes, k=self.n_clusters,
                                   seed=self.random_state,
                                   n_restarts=self.n_restarts,
                                   max_iter=self.max_iter)
        self.alphabet_ = alphabet
        self.centroids_ = alphabet.centroids
        self.labels_ = np.asarray(alphabet.assignment)
        self.inertia_ = alphabet.inertia
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "alphabet_"):
            raise RuntimeError("this StrokeClusterer instance is not fitted yet")
        strokes = self._as_strokes(X)
        labels, _ = self.alphabet_.assign(stroke_features(strokes))
        return labels

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).labels_

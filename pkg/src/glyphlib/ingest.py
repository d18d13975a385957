"""Corpus construction: canonical stroke files and trajectory-derived alphabets.

Modern-script corpora load directly from stroke-name programs. Ancient-script
corpora start from raw pen trajectories: each stroke polyline is fit with a
cubic Bézier curve (least squares, chord-length parameterization, endpoints
pinned), the control points become a translation-normalized feature vector,
and K-means over those features yields a fixed-size primitive alphabet the
glyphs are then encoded against.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .fileio import atomic_write_text, canon_json, read_jsonl, write_jsonl
from .lang import (
    CHINESE_STROKES, LIST, App, Corpus, Expr, Library, ParseError, Prim,
    PrimitiveAlphabet, parse, render,
)

__all__ = [
    "Trajectory", "BezierStroke", "DerivedAlphabet",
    "read_trajectories", "fit_bezier", "stroke_features", "cluster_strokes",
    "encode_corpus", "load_canonical", "load_corpus", "write_corpus",
    "write_alphabet", "read_alphabet",
]


@dataclass(frozen=True)
class Trajectory:
    """One glyph's strokes as ordered 2D polylines."""

    glyph_id: str
    strokes: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if not self.glyph_id:
            raise ValueError("empty glyph id")
        if not self.strokes:
            raise ValueError(f"{self.glyph_id}: no strokes")
        for i, s in enumerate(self.strokes):
            if s.ndim != 2 or s.shape[1] != 2 or s.shape[0] < 2:
                raise ValueError(
                    f"{self.glyph_id}: stroke {i} must be an (m>=2, 2) point array")
            if not np.isfinite(s).all():
                raise ValueError(f"{self.glyph_id}: stroke {i} has non-finite points")


def read_trajectories(path: str) -> list[Trajectory]:
    """Load trajectories from JSON Lines {"id", "strokes": [[[x,y],...],...]}."""
    out: list[Trajectory] = []
    seen: set[str] = set()
    for lineno, rec in read_jsonl(path):
        try:
            gid = rec["id"]
            strokes = tuple(np.asarray(s, dtype=float) for s in rec["strokes"])
            traj = Trajectory(gid, strokes)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: bad trajectory record: {exc}") from exc
        if gid in seen:
            raise ValueError(f"{path}:{lineno}: duplicate glyph id {gid!r}")
        seen.add(gid)
        out.append(traj)
    return out


@dataclass(frozen=True)
class BezierStroke:
    """Cubic Bézier fit of one stroke: 4 control points and the fit residual."""

    control: np.ndarray  # shape (4, 2)
    residual: float


def _bezier_points(control: np.ndarray, t: np.ndarray) -> np.ndarray:
    t = t[:, None]
    u = 1.0 - t
    return (u ** 3 * control[0] + 3 * u ** 2 * t * control[1]
            + 3 * u * t ** 2 * control[2] + t ** 3 * control[3])


def _solve_inner(q: np.ndarray, p0: np.ndarray, p3: np.ndarray,
                 t: np.ndarray) -> np.ndarray:
    u = 1.0 - t
    basis = np.stack([3 * u ** 2 * t, 3 * u * t ** 2], axis=1)
    rhs = q - (u ** 3)[:, None] * p0 - (t ** 3)[:, None] * p3
    inner, *_ = np.linalg.lstsq(basis, rhs, rcond=None)
    return np.vstack([p0, inner[0], inner[1], p3])


_FOOT_GRID = np.linspace(0.0, 1.0, 257)


def _nearest_params(q: np.ndarray, control: np.ndarray) -> np.ndarray:
    """Parameter of the nearest point on the curve, per sample, by dense search."""
    curve = _bezier_points(control, _FOOT_GRID)
    d2 = (np.sum(q * q, axis=1)[:, None] - 2.0 * q @ curve.T
          + np.sum(curve * curve, axis=1)[None, :])
    t = _FOOT_GRID[np.argmin(d2, axis=1)]
    t[0], t[-1] = 0.0, 1.0
    return t


def _lm_refine(q: np.ndarray, t: np.ndarray, control: np.ndarray,
               residual: float, iters: int
               ) -> tuple[np.ndarray, np.ndarray, float]:
    """Joint damped least-squares descent on sample parameters and inner controls.

    The interior parameters and the two inner control points move together;
    endpoints stay pinned. Alternating the two blocks instead tends to stall
    far from the optimum on curves whose speed varies strongly.
    """
    p0, p3 = control[0], control[3]
    idx = np.arange(1, q.shape[0] - 1)
    nt = len(idx)
    rows = np.arange(nt)
    lam = 1e-3

    def sq_residual(control: np.ndarray, t: np.ndarray) -> float:
        diff = q - _bezier_points(control, t)
        return float(np.mean(np.sum(diff * diff, axis=1)))

    for _ in range(iters):
        ti = t[idx]
        u = 1.0 - ti
        d1 = 3.0 * (control[1:] - control[:-1])
        vel = ((u ** 2)[:, None] * d1[0] + (2 * u * ti)[:, None] * d1[1]
               + (ti ** 2)[:, None] * d1[2])
        diff = _bezier_points(control, ti) - q[idx]
        b1 = 3 * u ** 2 * ti
        b2 = 3 * u * ti ** 2
        jac = np.zeros((2 * nt, nt + 4))
        jac[2 * rows, rows] = vel[:, 0]
        jac[2 * rows + 1, rows] = vel[:, 1]
        jac[2 * rows, nt] = b1
        jac[2 * rows + 1, nt + 1] = b1
        jac[2 * rows, nt + 2] = b2
        jac[2 * rows + 1, nt + 3] = b2
        normal = jac.T @ jac
        grad = jac.T @ diff.reshape(-1)
        damping = np.diag(np.diag(normal) + 1e-12)
        improved = False
        for _ in range(14):
            delta = np.linalg.solve(normal + lam * damping, -grad)
            t_new = t.copy()
            t_new[idx] = np.clip(ti + delta[:nt], 0.0, 1.0)
            control_new = np.vstack([p0, control[1] + delta[nt:nt + 2],
                                     control[2] + delta[nt + 2:nt + 4], p3])
            residual_new = sq_residual(control_new, t_new)
            if residual_new < residual:
                t, control, residual = t_new, control_new, residual_new
                lam = max(lam * 0.3, 1e-12)
                improved = True
                break
            lam *= 10.0
        if not improved or residual < 1e-18:
            break
    return t, control, residual


def fit_bezier(polyline: np.ndarray, refine_iters: int = 50) -> BezierStroke:
    """Least-squares cubic Bézier through a polyline, endpoints pinned.

    Sample parameters start at cumulative chord length; parameters and inner
    control points are then refined jointly by damped least squares, with the
    parameters re-seeded from nearest points on the fitted curve if the fit
    stalls, so points sampled from an exact cubic are recovered to numerical
    precision. A two-point polyline gets the canonical line-segment curve with
    inner control points at the 1/3 and 2/3 chord positions; a fully
    degenerate polyline collapses to a single point with zero residual.
    """
    q = np.asarray(polyline, dtype=float)
    if q.ndim != 2 or q.shape[1] != 2 or q.shape[0] < 2:
        raise ValueError("polyline must be an (m>=2, 2) point array")
    if not np.isfinite(q).all():
        raise ValueError("polyline has non-finite points")
    p0, p3 = q[0], q[-1]
    seg = np.linalg.norm(np.diff(q, axis=0), axis=1)
    total = float(seg.sum())
    if total == 0.0:
        control = np.vstack([q[0]] * 4)
        return BezierStroke(control=control, residual=0.0)
    if q.shape[0] == 2:
        control = np.vstack([p0, p0 + (p3 - p0) / 3.0, p0 + 2.0 * (p3 - p0) / 3.0, p3])
        return BezierStroke(control=control, residual=0.0)

    t = np.concatenate([[0.0], np.cumsum(seg)]) / total
    control = _solve_inner(q, p0, p3, t)
    diff = q - _bezier_points(control, t)
    residual = float(np.mean(np.sum(diff * diff, axis=1)))
    if refine_iters > 0:
        t, control, residual = _lm_refine(q, t, control, residual, refine_iters)
        for _ in range(3):
            if residual < 1e-14:
                break
            t_re = _nearest_params(q, control)
            control_re = _solve_inner(q, p0, p3, t_re)
            diff = q - _bezier_points(control_re, t_re)
            residual_re = float(np.mean(np.sum(diff * diff, axis=1)))
            t_re, control_re, residual_re = _lm_refine(
                q, t_re, control_re, residual_re, refine_iters)
            if residual_re < residual:
                t, control, residual = t_re, control_re, residual_re
    return BezierStroke(control=control, residual=residual)


def stroke_features(strokes: list[BezierStroke]) -> np.ndarray:
    """Feature matrix: control points translated so the start point is the origin."""
    if not strokes:
        return np.zeros((0, 8))
    return np.stack([(s.control - s.control[0]).reshape(8) for s in strokes])


# ---------------------------------------------------------------------------
# K-means over stroke features


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            centers[i] = x[rng.integers(n)]
        else:
            centers[i] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centers[i]) ** 2, axis=1))
    return centers


def _assign(x: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = (np.sum(x * x, axis=1)[:, None] - 2.0 * x @ centers.T
          + np.sum(centers * centers, axis=1)[None, :])
    np.maximum(d2, 0.0, out=d2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(x.shape[0]), labels]


def _lloyd(x: np.ndarray, centers: np.ndarray,
           max_iter: int) -> tuple[np.ndarray, np.ndarray, float]:
    k = centers.shape[0]
    labels = np.full(x.shape[0], -1)
    for _ in range(max_iter):
        new_labels, dist = _assign(x, centers)
        for c in range(k):
            mask = new_labels == c
            if mask.any():
                centers[c] = x[mask].mean(axis=0)
            else:
                far = int(np.argmax(dist))
                centers[c] = x[far]
                new_labels[far] = c
                dist[far] = 0.0
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    labels, dist = _assign(x, centers)
    return centers, labels, float(dist.sum())


def _kmeans(x: np.ndarray, k: int, seed: int, n_restarts: int,
            max_iter: int) -> tuple[np.ndarray, np.ndarray, float]:
    rng = np.random.default_rng(seed)
    best: tuple[np.ndarray, np.ndarray, float] | None = None
    for _ in range(n_restarts):
        centers = _kmeans_pp_init(x, k, rng)
        centers, labels, inertia = _lloyd(x, centers, max_iter)
        if best is None or inertia < best[2]:
            best = (centers, labels, inertia)
    assert best is not None
    return best


def _cluster_names(k: int) -> tuple[str, ...]:
    return tuple(f"c{i:02d}" for i in range(k))


@dataclass(frozen=True)
class DerivedAlphabet:
    """Stroke-cluster alphabet: centroids in feature space plus generated names."""

    k: int
    centroids: np.ndarray          # shape (k, 8)
    names: tuple[str, ...]
    assignment: tuple[int, ...]     # fit-time cluster index per input stroke
    inertia: float = 0.0

    def __post_init__(self) -> None:
        if self.k < 1 or self.centroids.shape != (self.k, 8):
            raise ValueError("centroids must have shape (k, 8)")
        if len(self.names) != self.k:
            raise ValueError("need exactly one name per cluster")

    def to_alphabet(self) -> PrimitiveAlphabet:
        return PrimitiveAlphabet(self.names)

    def assign(self, features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest-centroid index and Euclidean distance for each feature row."""
        labels, d2 = _assign(np.asarray(features, dtype=float), self.centroids)
        return labels, np.sqrt(d2)


def cluster_strokes(strokes: list[BezierStroke], k: int = 33, seed: int = 0,
                    n_restarts: int = 10, max_iter: int = 300) -> DerivedAlphabet:
    """Quantize fitted strokes into a k-symbol alphabet by K-means.

    Deterministic for a given seed: k-means++ seeding, Lloyd iterations to an
    assignment fixpoint with farthest-point repair of empty clusters, best of
    n_restarts by final within-cluster sum of squares (earlier restart wins
    ties), then one final assignment pass against the winning centroids.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(strokes) < k:
        raise ValueError(f"need at least k={k} strokes, got {len(strokes)}")
    x = stroke_features(strokes)
    centers, labels, inertia = _kmeans(x, k, seed, n_restarts, max_iter)
    return DerivedAlphabet(k=k, centroids=centers, names=_cluster_names(k),
                           assignment=tuple(int(l) for l in labels),
                           inertia=inertia)


def encode_corpus(trajectories: list[Trajectory], alphabet: DerivedAlphabet,
                  assign_threshold: float | None = None
                  ) -> tuple[Corpus, list[tuple[str, int, float]]]:
    """Encode glyphs as flat sequence programs of cluster-name primitives.

    Returns the corpus plus exclusion diagnostics (glyph id, stroke index,
    distance) for glyphs containing a stroke farther than assign_threshold
    from every centroid; without a threshold every glyph is encoded.
    """
    prims = alphabet.to_alphabet()
    entries: dict[str, Expr] = {}
    excluded: list[tuple[str, int, float]] = []
    for traj in trajectories:
        fits = [fit_bezier(s) for s in traj.strokes]
        labels, dists = alphabet.assign(stroke_features(fits))
        bad = [(i, float(d)) for i, d in enumerate(dists)
               if assign_threshold is not None and d > assign_threshold]
        if bad:
            i, d = max(bad, key=lambda p: p[1])
            excluded.append((traj.glyph_id, i, d))
            warnings.warn(
                f"{traj.glyph_id}: stroke {i} is {d:.4f} from the nearest "
                f"centroid (> {assign_threshold}); glyph excluded")
            continue
        expr: Expr = LIST
        for c in labels:
            expr = App(expr, Prim(alphabet.names[int(c)]))
        entries[traj.glyph_id] = expr
    return Corpus(prims, entries), excluded


# ---------------------------------------------------------------------------
# corpus and alphabet files


def load_corpus(path: str, library: Library) -> Corpus:
    """Load a corpus from JSON Lines {"id", "program"} over the given library."""
    entries: dict[str, Expr] = {}
    for lineno, rec in read_jsonl(path):
        try:
            gid, text = rec["id"], rec["program"]
        except KeyError as exc:
            raise ValueError(f"{path}:{lineno}: record needs id and program") from exc
        if gid in entries:
            raise ValueError(f"{path}:{lineno}: duplicate glyph id {gid!r}")
        try:
            entries[gid] = parse(text, library)
        except ParseError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
    if not entries:
        warnings.warn(f"{path}: empty corpus")
    return Corpus(library.base, entries)


def load_canonical(path: str) -> Corpus:
    """Load a canonical stroke corpus over the standard 33-stroke alphabet."""
    return load_corpus(path, Library(CHINESE_STROKES))


def write_corpus(path: str, corpus: Corpus, meta: dict | None = None) -> None:
    records = [{"id": gid, "program": render(e)}
               for gid, e in corpus.entries.items()]
    write_jsonl(path, records, meta=meta)


def write_alphabet(path: str, alphabet: DerivedAlphabet,
                   meta: dict | None = None) -> None:
    doc = {
        "k": alphabet.k,
        "names": list(alphabet.names),
        "centroids": [[float(v) for v in row] for row in alphabet.centroids],
        "assignment": list(alphabet.assignment),
        "inertia": alphabet.inertia,
    }
    if meta is not None:
        doc["meta"] = meta
    atomic_write_text(path, canon_json(doc) + "\n")


def read_alphabet(path: str) -> DerivedAlphabet:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        return DerivedAlphabet(
            k=int(doc["k"]),
            centroids=np.asarray(doc["centroids"], dtype=float),
            names=tuple(doc["names"]),
            assignment=tuple(int(i) for i in doc.get("assignment", ())),
            inertia=float(doc.get("inertia", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: bad alphabet file: {exc}") from exc

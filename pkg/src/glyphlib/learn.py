"""Greedy library learning by MDL compression.

Each iteration mines candidate patterns from the current rewritten corpus
(connected subterms with holes at subterm boundaries), ranks them by a
tree-level utility estimate found with best-first refinement under an
admissible bound, then computes exact utilities (full re-rewrite of affected
programs over the token algebra) for a deterministic shortlist and accepts the
best candidate while its exact utility stays positive. Accepted utilities are
exact, so the corpus-plus-library description length strictly decreases at
every step.
"""

from __future__ import annotations

import bisect
import heapq
import warnings
from dataclasses import dataclass, field

from .lang import (
    LIST, Abstraction, App, Corpus, CostModel, Expr, LibRef, Library,
    ListHead, Prim, Var, cost, render, tokens, validate_program, _leaves,
)
from .rewrite import rewrite_corpus_entries, rewrite_cost, rewrite_tokens

__all__ = [
    "LearnConfig", "LearnStep", "LearnTrace", "CandidateAbstraction",
    "best_abstraction", "learn_library", "usage_counts", "hierarchy_stats",
    "UsageStat", "HierarchyStats",
]

_HOLE = ("?",)
_SEARCH_BUDGET = 1_000_000


@dataclass(frozen=True)
class LearnConfig:
    max_arity: int = 3
    max_iterations: int = 10_000
    shortlist_size: int = 16
    threads: int = 1

    def __post_init__(self) -> None:
        if self.max_arity < 0 or self.max_iterations < 0:
            raise ValueError("max_arity and max_iterations must be >= 0")
        if self.shortlist_size < 1:
            raise ValueError("shortlist_size must be >= 1")


@dataclass
class LearnStep:
    iteration: int
    name: str
    arity: int
    utility: int
    corpus_dl: int
    library_dl: int


@dataclass
class LearnTrace:
    initial_corpus_dl: int
    steps: list[LearnStep] = field(default_factory=list)
    capped: bool = False


@dataclass
class CandidateAbstraction:
    """A promotable pattern with its exact utility under the current library."""

    name: str
    arity: int
    body: Expr
    utility: int
    estimate: int
    uses: int
    sites: list[tuple[str, int]]
    rewrites: dict[str, tuple[int, Expr]]


class _Forest:
    """Preorder array view of one program tree."""

    __slots__ = ("kind", "sym", "left", "right", "size", "leaves", "argok")
    APP, PRIM, REF, LIST_K = 0, 1, 2, 3

    def __init__(self, expr: Expr, library: Library):
        kind: list[int] = []
        sym: list[str | None] = []
        left: list[int] = []
        right: list[int] = []

        def add(e: Expr) -> int:
            idx = len(kind)
            kind.append(-1)
            sym.append(None)
            left.append(-1)
            right.append(-1)
            if isinstance(e, App):
                kind[idx] = self.APP
                left[idx] = add(e.fn)
                right[idx] = add(e.arg)
            elif isinstance(e, Prim):
                kind[idx] = self.PRIM
                sym[idx] = e.name
            elif isinstance(e, LibRef):
                kind[idx] = self.REF
                sym[idx] = e.name
            elif isinstance(e, ListHead):
                kind[idx] = self.LIST_K
            else:
                raise ValueError("corpus programs must be closed")
            return idx

        add(expr)
        n = len(kind)
        size = [1] * n
        leaves = [1] * n
        heads = list(range(n))
        nargs = [0] * n
        for i in range(n - 1, -1, -1):
            if kind[i] == self.APP:
                size[i] = 1 + size[left[i]] + size[right[i]]
                leaves[i] = leaves[left[i]] + leaves[right[i]]
                heads[i] = heads[left[i]]
                nargs[i] = nargs[left[i]] + 1
        argok = [True] * n
        for i in range(n):
            h = heads[i]
            if kind[h] == self.REF and library.info(sym[h]).arity > nargs[i]:
                argok[i] = False
        self.kind, self.sym, self.left, self.right = kind, sym, left, right
        self.size, self.leaves, self.argok = size, leaves, argok


@dataclass
class _Mined:
    shape: tuple
    arity: int
    patcost: int
    uses: int
    estimate: int
    sites: list[tuple[str, int]]
    body_str: str = ""


class _SearchNode:
    __slots__ = ("shape", "holes_meta", "nlits", "napps", "nvars", "sites", "ub")

    def __init__(self, shape, holes_meta, nlits, napps, nvars, sites, ub):
        self.shape = shape
        self.holes_meta = holes_meta
        self.nlits = nlits
        self.napps = napps
        self.nvars = nvars
        self.sites = sites
        self.ub = ub


def _fill_first(shape: tuple, repl: tuple) -> tuple:
    """Replace the first hole of a preorder-flattened pattern.

    Shapes are flat tuples of tagged nodes in preorder — ("app",) is followed
    by its two subtrees — so the first ("?",) element is the leftmost hole.
    """
    i = shape.index(_HOLE)
    return shape[:i] + repl + shape[i + 1:]


def _shape_expr(shape: tuple) -> Expr:
    pos = 0

    def go() -> Expr:
        nonlocal pos
        t = shape[pos]
        pos += 1
        tag = t[0]
        if tag == "app":
            fn = go()
            return App(fn, go())
        if tag == "prim":
            return Prim(t[1])
        if tag == "ref":
            return LibRef(t[1])
        if tag == "list":
            return LIST
        if tag == "var":
            return Var(t[1])
        raise ValueError(f"unfilled hole in shape {shape!r}")

    return go()


def _nonoverlap(sites, forests) -> list[tuple[str, int]]:
    """Leftmost-outermost maximal non-overlapping site selection."""
    taken: list[tuple[str, int]] = []
    cur_pid = None
    cur_end = -1
    for pid, root, _ in sites:
        if pid != cur_pid:
            cur_pid, cur_end = pid, -1
        if root >= cur_end:
            taken.append((pid, root))
            cur_end = root + forests[pid].size[root]
    return taken


def _mine(entries: dict[str, Expr], library: Library, model: CostModel,
          max_arity: int) -> list[_Mined]:
    T = model.terminal_cost
    A = model.application_cost
    forests = {pid: _Forest(e, library) for pid, e in entries.items()}

    def node_cost(pid: str, idx: int) -> int:
        return (T + A) * forests[pid].leaves[idx] - A

    def upper_bound(taken) -> int:
        return sum(max(0, node_cost(p, r) - T) for p, r in taken) - T

    seed_sites = []
    for pid, f in forests.items():
        for i, k in enumerate(f.kind):
            if k == _Forest.APP:
                seed_sites.append((pid, i, (f.left[i], f.right[i])))
    if not seed_sites:
        return []

    taken0 = _nonoverlap(seed_sites, forests)
    root = _SearchNode((("app",), _HOLE, _HOLE), ((1, True), (0, False)),
                       0, 1, 0, seed_sites, upper_bound(taken0))
    heap = [(-root.ub, 0, root)]
    counter = 1
    best_est = 0
    out: list[_Mined] = []
    pops = 0

    while heap:
        nub, _, node = heapq.heappop(heap)
        if -nub <= max(best_est, 0):
            break
        pops += 1
        if pops > _SEARCH_BUDGET:
            warnings.warn("pattern search budget exhausted; result may be partial")
            break

        apps_above, leftmost = node.holes_meta[0]
        rest_meta = node.holes_meta[1:]
        sym_groups: dict[tuple[int, str | None], list] = {}
        app_sites: list = []
        var_sites: list = []
        for pid, r, holes in node.sites:
            f = forests[pid]
            h = holes[0]
            k = f.kind[h]
            if k == _Forest.APP:
                app_sites.append((pid, r, (f.left[h], f.right[h]) + holes[1:]))
            else:
                sym_groups.setdefault((k, f.sym[h]), []).append((pid, r, holes[1:]))
            if f.argok[h]:
                var_sites.append((pid, r, holes[1:]))

        children: list[_SearchNode] = []
        for (k, s), sites in sorted(sym_groups.items(),
                                    key=lambda kv: (kv[0][0], kv[0][1] or "")):
            if k == _Forest.REF:
                if library.info(s).arity > apps_above:
                    continue
                repl = (("ref", s),)
            elif k == _Forest.PRIM:
                repl = (("prim", s),)
            else:
                if not leftmost:
                    continue
                repl = (("list",),)
            children.append(_SearchNode(
                _fill_first(node.shape, repl), rest_meta,
                node.nlits + 1, node.napps, node.nvars, sites, 0))
        if app_sites:
            meta = ((apps_above + 1, leftmost), (0, False)) + rest_meta
            children.append(_SearchNode(
                _fill_first(node.shape, (("app",), _HOLE, _HOLE)), meta,
                node.nlits, node.napps + 1, node.nvars, app_sites, 0))
        if node.nvars < max_arity and var_sites:
            children.append(_SearchNode(
                _fill_first(node.shape, (("var", node.nvars),)), rest_meta,
                node.nlits, node.napps, node.nvars + 1, var_sites, 0))

        for child in children:
            taken = _nonoverlap(child.sites, forests)
            u = len(taken)
            if u < 2:
                continue
            if not child.holes_meta:
                patcost = T * child.nlits + A * child.napps
                est = u * (patcost - T - child.nvars * A) - (patcost + child.nvars * T)
                if est > 0:
                    out.append(_Mined(child.shape, child.nvars, patcost, u, est, taken))
                    if est > best_est:
                        best_est = est
                continue
            child.ub = upper_bound(taken)
            if child.ub > max(best_est, 0):
                heapq.heappush(heap, (-child.ub, counter, child))
                counter += 1
    return out


def _may_match(info, seq: tuple[str, ...]) -> bool:
    """Cheap necessary condition for the template to match somewhere in seq."""
    if info.min_len > len(seq):
        return False
    pos = 0
    n = len(seq)
    for run in info.runs:
        w = len(run)
        found = -1
        for s in range(pos, n - w + 1):
            if seq[s:s + w] == run:
                found = s
                break
        if found < 0:
            return False
        pos = found + w
    return True


def _best_abstraction(entries: dict[str, Expr], seqs: dict[str, tuple],
                      costs: dict[str, int], library: Library, model: CostModel,
                      max_arity: int, shortlist_size: int,
                      next_name: str) -> CandidateAbstraction | None:
    mined = _mine(entries, library, model, max_arity)
    if not mined:
        return None
    for m in mined:
        m.body_str = render(_shape_expr(m.shape))
    mined.sort(key=lambda m: (-m.estimate, m.arity, -m.uses, m.body_str))
    top = mined[0].estimate
    shortlist = [m for i, m in enumerate(mined)
                 if i < shortlist_size or m.estimate == top]

    T = model.terminal_cost
    best: CandidateAbstraction | None = None
    best_key = None
    best_lib = None
    best_gids: list[str] = []
    for m in shortlist:
        body = _shape_expr(m.shape)
        try:
            lib2 = library.extend(Abstraction(next_name, m.arity, body))
        except ValueError:
            continue
        info = lib2.info(next_name)
        body_cost = cost(body, model)
        # Inlining every use of the new abstraction turns a term over lib2
        # back into one over the old library, growing it by body_cost - T per
        # use; old costs are already optimal, so a program with at most k
        # disjoint uses saves at most k * (body_cost - T). Multiset counting
        # bounds k. Biggest potential first, so the abort below fires early.
        mult: dict[str, int] = {}
        for t in info.contributed:
            mult[t] = mult.get(t, 0) + 1
        bounds: dict[str, int] = {}
        for gid, seq in seqs.items():
            if not _may_match(info, seq):
                continue
            k = (min(seq.count(t) // c for t, c in mult.items())
                 if mult else len(seq))
            bounds[gid] = min(k * (body_cost - T), costs[gid] - T)
        affected = sorted(bounds, key=lambda g: (-bounds[g], g))
        remaining = sum(bounds.values())
        improved: list[str] = []
        delta = 0
        viable = True
        for gid in affected:
            # final utility is at most delta + remaining - body_cost; strict
            # shortfall against the incumbent (ties still compare by key)
            # ends the candidate
            bound = delta + remaining - body_cost
            if bound <= 0 or (best is not None and bound < best.utility):
                viable = False
                break
            remaining -= bounds[gid]
            c_new = rewrite_cost(seqs[gid], lib2, model)
            if c_new < costs[gid]:
                delta += costs[gid] - c_new
                improved.append(gid)
        if not viable:
            continue
        utility = delta - body_cost
        if utility <= 0:
            continue
        key = (-utility, m.arity, -m.uses, m.body_str)
        if best_key is None or key < best_key:
            best_key = key
            best_lib = lib2
            best_gids = improved
            best = CandidateAbstraction(
                name=next_name, arity=m.arity, body=body, utility=utility,
                estimate=m.estimate, uses=m.uses, sites=m.sites,
                rewrites={})
    if best is not None:
        # terms are only needed for the winner; the shortlist sweep above is
        # evaluated cost-only
        for gid in best_gids:
            best.rewrites[gid] = rewrite_tokens(seqs[gid], best_lib, model)
    return best


def best_abstraction(corpus: Corpus, library: Library, model: CostModel,
                     max_arity: int = 3,
                     shortlist_size: int = 16) -> CandidateAbstraction | None:
    """Best next abstraction for a corpus already rewritten under library.

    Returns None when no candidate has positive exact utility.
    """
    entries = dict(corpus.entries)
    seqs = {gid: tokens(e, library) for gid, e in entries.items()}
    costs = {gid: cost(e, model) for gid, e in entries.items()}
    return _best_abstraction(entries, seqs, costs, library, model,
                             max_arity, shortlist_size,
                             next_name=f"fn_{len(library)}")


def learn_library(corpus: Corpus, model: CostModel = CostModel(),
                  config: LearnConfig = LearnConfig()
                  ) -> tuple[Library, Corpus, LearnTrace]:
    """Greedy one-abstraction-per-iteration library learning.

    Returns the final library, the corpus rewritten under it, and the
    per-iteration trace. Sets trace.capped when the iteration cap stopped the
    loop before convergence was confirmed.
    """
    lib = Library(corpus.alphabet)
    seqs = {gid: validate_program(e, lib) for gid, e in corpus.entries.items()}
    rw = rewrite_corpus_entries(corpus.entries, lib, model, config.threads)
    costs = {gid: cost(e, model) for gid, e in rw.items()}
    trace = LearnTrace(initial_corpus_dl=sum(costs.values()))
    lib_dl = 0

    converged = False
    for it in range(config.max_iterations):
        cand = _best_abstraction(rw, seqs, costs, lib, model,
                                 config.max_arity, config.shortlist_size,
                                 next_name=f"fn_{len(lib)}")
        if cand is None:
            converged = True
            break
        lib = lib.extend(Abstraction(cand.name, cand.arity, cand.body))
        for gid, (c2, e2) in cand.rewrites.items():
            rw[gid] = e2
            costs[gid] = c2
        lib_dl += cost(cand.body, model)
        trace.steps.append(LearnStep(
            iteration=it, name=cand.name, arity=cand.arity,
            utility=cand.utility, corpus_dl=sum(costs.values()),
            library_dl=lib_dl))
    if not converged and config.max_iterations > 0:
        trace.capped = True
        warnings.warn("iteration cap reached before convergence was confirmed")

    rewritten = Corpus(corpus.alphabet, {gid: rw[gid] for gid in corpus.entries})
    return lib, rewritten, trace


@dataclass
class UsageStat:
    uses: int
    percentile: float


def usage_counts(rewritten: Corpus, library: Library) -> dict[str, UsageStat]:
    """Reference counts per learned function, across entries and bodies.

    The percentile of a function is the share of learned functions whose use
    count does not exceed its own.
    """
    counts = {fn.name: 0 for fn in library.learned}

    def tally(e: Expr) -> None:
        for leaf in _leaves(e):
            if isinstance(leaf, LibRef) and leaf.name in counts:
                counts[leaf.name] += 1

    for e in rewritten.entries.values():
        tally(e)
    for fn in library.learned:
        tally(fn.body)

    n = len(counts)
    if n == 0:
        return {}
    ordered = sorted(counts.values())
    return {
        name: UsageStat(u, 100.0 * bisect.bisect_right(ordered, u) / n)
        for name, u in counts.items()
    }


@dataclass
class HierarchyStats:
    learned: int
    hierarchical: int
    fraction: float
    max_depth: int


def hierarchy_stats(library: Library) -> HierarchyStats:
    """Share of abstractions built on other abstractions, and the deepest chain."""
    depth: dict[str, int] = {}
    hierarchical = 0
    for fn in library.learned:
        refs = [l.name for l in _leaves(fn.body) if isinstance(l, LibRef)]
        if refs:
            hierarchical += 1
            depth[fn.name] = 1 + max(depth[r] for r in refs)
        else:
            depth[fn.name] = 1
    n = len(library.learned)
    return HierarchyStats(
        learned=n,
        hierarchical=hierarchical,
        fraction=(hierarchical / n) if n else 0.0,
        max_depth=max(depth.values()) if depth else 0,
    )

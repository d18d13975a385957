"""Optimal rewriting of glyph programs against a library.

rewrite() returns a minimum-cost term whose expansion equals the input's,
found by interval dynamic programming over the token sequence: a term covering
tokens [i, j) is either a single leaf, an arity-0 abstraction whose sequence
matches exactly, an abstraction application whose body template is matched
over the interval with arguments bound to sub-intervals, or a shorter spine
extended by one more argument. Ties in cost resolve to the smallest preorder
symbol key (App < learned fns by definition order < list < primitives), which
prefers earlier-defined abstractions at the leftmost position and keeps flat
spines canonical.
"""

from __future__ import annotations

from .lang import (
    App, CostModel, Expr, LIST, LibRef, Library, MARK, Prim, cost, tokens,
)

__all__ = ["rewrite", "rewrite_cost", "rewrite_tokens", "rewrite_corpus_entries"]

_LIST_RANK = 1_000_000


def _leaf(tok: str, lib: Library, T: int) -> tuple[int, tuple[int, ...], Expr]:
    if tok == MARK:
        return T, (_LIST_RANK,), LIST
    return T, (_LIST_RANK + 1 + lib.base.index(tok),), Prim(tok)


def _match_template(info, toks, i, j, best):
    """Minimal argument cost assignment of a body template onto toks[i:j).

    Returns (args_cost, bindings) with bindings[var] = (a, b), or None.
    Bodies with repeated variables fall back to consistency-checked
    backtracking; the common single-occurrence case is a small memoized DP.
    """
    tpl = info.template
    suf = info.suffix_min
    nt = len(tpl)

    if info.one_var is not None:
        pre, var, post = info.one_var
        a = i + len(pre)
        b = j - len(post)
        if b <= a or toks[i:a] != pre or toks[b:j] != post:
            return None
        return best[a][b][0], {var: (a, b)}

    if info.unique_vars:
        memo: dict[tuple[int, int], tuple[int, int] | None] = {}

        def go(ti: int, p: int):
            # returns (cost, split choice) or None
            key = (ti, p)
            if key in memo:
                return memo[key]
            if ti == nt:
                res = (0, -1) if p == j else None
                memo[key] = res
                return res
            t = tpl[ti]
            res = None
            if isinstance(t, str):
                if p < j and toks[p] == t:
                    sub = go(ti + 1, p + 1)
                    if sub is not None:
                        res = (sub[0], p + 1)
            else:
                hi = j - suf[ti + 1]
                for e in range(p + 1, hi + 1):
                    cell = best[p][e]
                    sub = go(ti + 1, e)
                    if sub is not None:
                        c = cell[0] + sub[0]
                        if res is None or c < res[0]:
                            res = (c, e)
            memo[key] = res
            return res

        if go(0, i) is None:
            return None
        bindings: dict[int, tuple[int, int]] = {}
        ti, p = 0, i
        while ti < nt:
            _, e = memo[(ti, p)]
            if isinstance(tpl[ti], int):
                bindings[tpl[ti]] = (p, e)
            ti, p = ti + 1, e
        args_cost = sum(best[a][b][0] for a, b in bindings.values())
        return args_cost, bindings

    # repeated variables: backtrack with content consistency
    bound: dict[int, tuple[int, int]] = {}
    out: list[tuple[int, dict[int, tuple[int, int]]]] = []

    def bt(ti: int, p: int) -> bool:
        if ti == nt:
            if p == j:
                c = sum(best[a][b][0] for a, b in bound.values())
                if not out or c < out[0][0]:
                    out[:] = [(c, dict(bound))]
                return True
            return False
        t = tpl[ti]
        if isinstance(t, str):
            return p < j and toks[p] == t and bt(ti + 1, p + 1)
        if t in bound:
            a, b = bound[t]
            w = b - a
            if p + w <= j and toks[p:p + w] == toks[a:b]:
                return bt(ti + 1, p + w)
            return False
        ok = False
        for e in range(p + 1, j - suf[ti + 1] + 1):
            bound[t] = (p, e)
            ok = bt(ti + 1, e) or ok
            del bound[t]
        return ok

    bt(0, i)
    if not out:
        return None
    return out[0]


def _template_plan(library: Library, T: int, A: int):
    """Per-abstraction pruning data: (info, cost floor, first/last literal).

    Any application of an arity-k abstraction costs at least
    T + k*(A + T) (head terminal, k applications, each argument at least one
    terminal), so cells already cheaper than that floor can skip matching.
    """
    plan = []
    for info in library.templated:
        tpl = info.template
        first = tpl[0] if isinstance(tpl[0], str) else None
        last = tpl[-1] if isinstance(tpl[-1], str) else None
        plan.append((info, T + info.arity * (A + T), first, last))
    return plan


def rewrite_tokens(toks: tuple[str, ...], library: Library,
                   model: CostModel) -> tuple[int, Expr]:
    """Minimum-cost term expanding to the given token sequence."""
    n = len(toks)
    if n == 0:
        raise ValueError("empty token sequence")
    T = model.terminal_cost
    A = model.application_cost
    best: list[list[tuple[int, tuple[int, ...], Expr] | None]] = [
        [None] * (n + 1) for _ in range(n)
    ]

    plan = _template_plan(library, T, A)
    seq_lens = library._seq_lens
    leaves = {t: _leaf(t, library, T) for t in set(toks)}
    for span in range(1, n + 1):
        for i in range(n - span + 1):
            j = i + span
            if span == 1:
                win = leaves[toks[i]]
            else:
                win = None
                for m in range(i + 1, j):
                    lc = best[i][m]
                    rc = best[m][j]
                    c = lc[0] + rc[0] + A
                    if win is not None and c > win[0]:
                        continue
                    cand = (c, (0,) + lc[1] + rc[1], App(lc[2], rc[2]))
                    if win is None or cand[:2] < win[:2]:
                        win = cand
            name = (library.seq_lookup(toks[i:j])
                    if span in seq_lens else None)
            if name is not None:
                cand = (T, (1 + library.info(name).rank,), LibRef(name))
                if win is None or cand[:2] < win[:2]:
                    win = cand
            for info, floor, first, last in plan:
                if info.min_len > span or (info.has_mark and i != 0):
                    continue
                if win is not None and win[0] < floor:
                    continue
                if first is not None and toks[i] != first:
                    continue
                if last is not None and toks[j - 1] != last:
                    continue
                m = _match_template(info, toks, i, j, best)
                if m is None:
                    continue
                args_cost, bindings = m
                c = T + info.arity * A + args_cost
                if win is not None and c > win[0]:
                    continue
                key: tuple[int, ...] = (0,) * info.arity + (1 + info.rank,)
                e: Expr = LibRef(info.name)
                for v in range(info.arity):
                    a, b = bindings[v]
                    cell = best[a][b]
                    key = key + cell[1]
                    e = App(e, cell[2])
                cand = (c, key, e)
                if win is None or cand[:2] < win[:2]:
                    win = cand
            best[i][j] = win

    c, _, e = best[0][n]
    return c, e


def rewrite_cost(toks: tuple[str, ...], library: Library,
                 model: CostModel) -> int:
    """Cost of rewrite_tokens without building terms.

    Same recurrence over single-field cells, so _match_template's cell[0]
    reads still work; the minimum is unique as a number, making tie handling
    unnecessary here.
    """
    n = len(toks)
    if n == 0:
        raise ValueError("empty token sequence")
    T = model.terminal_cost
    A = model.application_cost
    best: list[list[tuple[int] | None]] = [[None] * (n + 1) for _ in range(n)]

    plan = _template_plan(library, T, A)
    seq_lens = library._seq_lens
    for span in range(1, n + 1):
        for i in range(n - span + 1):
            j = i + span
            if span == 1:
                win = T
            else:
                win = None
                for m in range(i + 1, j):
                    c = best[i][m][0] + best[m][j][0] + A
                    if win is None or c < win:
                        win = c
            if span in seq_lens and library.seq_lookup(
                    toks[i:j]) is not None and (win is None or T < win):
                win = T
            for info, floor, first, last in plan:
                if info.min_len > span or (info.has_mark and i != 0):
                    continue
                if win is not None and win <= floor:
                    continue
                if first is not None and toks[i] != first:
                    continue
                if last is not None and toks[j - 1] != last:
                    continue
                m = _match_template(info, toks, i, j, best)
                if m is None:
                    continue
                c = T + info.arity * A + m[0]
                if win is None or c < win:
                    win = c
            best[i][j] = (win,)

    return best[0][n][0]


def rewrite(expr: Expr, library: Library, model: CostModel) -> Expr:
    """Minimum-cost term over the full library with the same expansion as expr."""
    toks = tokens(expr, library)
    new_cost, new_expr = rewrite_tokens(toks, library, model)
    if new_cost > cost(expr, model):
        # cannot happen: the DP always has the literal spine available
        return expr
    return new_expr


def rewrite_corpus_entries(entries: dict[str, Expr], library: Library,
                           model: CostModel, threads: int = 1) -> dict[str, Expr]:
    """Rewrite every entry; deterministic regardless of thread count."""
    items = list(entries.items())
    tok_seqs = [tokens(e, library) for _, e in items]
    if threads > 1 and len(items) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda t: rewrite_tokens(t, library, model), tok_seqs))
    else:
        results = [rewrite_tokens(t, library, model) for t in tok_seqs]
    return {gid: e for (gid, _), (_, e) in zip(items, results)}

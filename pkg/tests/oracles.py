"""Independent reference implementations used to cross-check the package.

Everything here recomputes answers from first principles, structured
differently from the shipping code: templates by direct substitution over the
public AST, minimum rewrite cost by exhaustive decomposition (exact template
covers plus binary splits) with memoization, and term enumeration for
small-scale ground truth on every reachable token sequence.
"""

from __future__ import annotations

from itertools import product

from glyphlib import LIST, App, CostModel, LibRef, Library, ListHead, MARK, Prim, Var

INF = float("inf")


def _spine(e):
    args = []
    while isinstance(e, App):
        args.append(e.arg)
        e = e.fn
    return e, args[::-1]


def expr_template(e, library: Library, memo: dict) -> list:
    """Token template of an expression: stroke names, MARK, and ints for vars."""
    head, args = _spine(e)
    out: list = []
    if isinstance(head, ListHead):
        out.append(MARK)
    elif isinstance(head, Prim):
        out.append(head.name)
    elif isinstance(head, Var):
        out.append(head.index)
    elif isinstance(head, LibRef):
        sub = fn_template(library, head.name, memo)
        arity = library.get(head.name).arity
        bound = [expr_template(a, library, memo) for a in args[:arity]]
        for t in sub:
            if isinstance(t, int):
                out.extend(bound[t])
            else:
                out.append(t)
        args = args[arity:]
    for a in args:
        out.extend(expr_template(a, library, memo))
    return out


def fn_template(library: Library, name: str, memo: dict) -> list:
    if name not in memo:
        memo[name] = expr_template(library.get(name).body, library, memo)
    return memo[name]


def min_rewrite_cost(seq, library: Library, model: CostModel) -> float:
    """Minimum cost over every term whose token sequence equals seq.

    A term's sequence decomposes as either a single leaf, an exact template
    cover of some abstraction (arguments bound to non-empty subsequences), or
    the concatenation of two complete subterms. Sequences with the list
    marker anywhere past position 0 denote no term.
    """
    T = model.terminal_cost
    A = model.application_cost
    tmemo: dict = {}
    fns = [(fn.arity, tuple(fn_template(library, fn.name, tmemo)))
           for fn in library.learned]
    memo: dict = {}

    def covers(tpl, seq):
        """Every way tpl covers seq exactly, as var -> subsequence dicts."""

        def go(ti, pos, bound):
            if ti == len(tpl):
                if pos == len(seq):
                    yield dict(bound)
                return
            t = tpl[ti]
            if isinstance(t, str):
                if pos < len(seq) and seq[pos] == t:
                    yield from go(ti + 1, pos + 1, bound)
                return
            if t in bound:
                w = bound[t]
                if seq[pos:pos + len(w)] == w:
                    yield from go(ti + 1, pos + len(w), bound)
                return
            for end in range(pos + 1, len(seq) + 1):
                bound[t] = seq[pos:end]
                yield from go(ti + 1, end, bound)
                del bound[t]

        yield from go(0, 0, {})

    def best(seq) -> float:
        if seq in memo:
            return memo[seq]
        res = INF
        if MARK in seq[1:]:
            memo[seq] = res
            return res
        if len(seq) == 1:
            res = T  # a stroke leaf, or the bare list head
        for arity, tpl in fns:
            if arity == 0:
                if tpl == seq:
                    res = min(res, T)
                continue
            for bound in covers(tpl, seq):
                c = T + arity * A + sum(best(b) for b in bound.values())
                res = min(res, c)
        for m in range(1, len(seq)):
            res = min(res, best(seq[:m]) + best(seq[m:]) + A)
        memo[seq] = res
        return res

    return best(tuple(seq))


def enumerate_sequence_costs(library: Library, leaf_names, max_leaves: int,
                             model: CostModel) -> dict:
    """Ground-truth map sequence -> minimum term cost by brute enumeration.

    Builds every application tree with up to max_leaves leaves drawn from the
    given strokes, the list head, and the library's abstractions, keeps the
    ones denoting a sequence (fully applied references, marker only at the
    front), and records the cheapest cost seen per sequence.
    """
    leaves = [LIST] + [Prim(n) for n in leaf_names]
    leaves += [LibRef(fn.name) for fn in library.learned]
    tmemo: dict = {}
    shapes_memo: dict = {}

    def shapes(n):
        if n not in shapes_memo:
            if n == 1:
                shapes_memo[n] = [None]  # a leaf slot
            else:
                acc = []
                for left in range(1, n):
                    for ls, rs in product(shapes(left), shapes(n - left)):
                        acc.append((ls, rs))
                shapes_memo[n] = acc
        return shapes_memo[n]

    def fill(shape):
        if shape is None:
            yield from leaves
            return
        ls, rs = shape
        for f in fill(ls):
            for x in fill(rs):
                yield App(f, x)

    out: dict = {}
    for n in range(1, max_leaves + 1):
        term_cost = model.terminal_cost * n + model.application_cost * (n - 1)
        for shape in shapes(n):
            for term in fill(shape):
                try:
                    tpl = expr_template(term, library, tmemo)
                except IndexError:
                    continue  # under-applied reference: no sequence
                if any(isinstance(t, int) for t in tpl):
                    continue
                seq = tuple(tpl)
                if MARK in seq[1:]:
                    continue
                if seq not in out or term_cost < out[seq]:
                    out[seq] = term_cost
    return out

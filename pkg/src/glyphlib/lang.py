"""Term language for stroke-sequence glyph programs.

A program is a curried application spine over stroke primitives, learned
abstractions (fn_k), numbered variables (#k, inside abstraction bodies only)
and the sequence marker `list`. Application is left associative and flattening:
((list A B) C) and (list A B C) denote the same stroke sequence, and an
abstraction parameter may sit in head position of its body's spine, in which
case the argument's sequence is spliced in front and re-flattened.

Semantically every term denotes a flat token sequence; the `list` symbol
denotes a start marker. A complete glyph program is a term whose expansion
carries exactly one marker, at position 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Union

__all__ = [
    "Prim", "Var", "LibRef", "ListHead", "App", "Expr", "LIST", "MARK",
    "ParseError", "ExpansionError", "ArityError",
    "PrimitiveAlphabet", "CHINESE_STROKES", "CostModel",
    "Abstraction", "Library", "Corpus",
    "parse", "render", "expand", "tokens", "cost", "leaf_count", "library_dl",
    "spine", "validate_program",
    "read_library", "write_library", "format_abstraction",
]


class ParseError(ValueError):
    """Raised for malformed program text."""


class ExpansionError(ValueError):
    """Raised when a term cannot be expanded to a token sequence."""


class ArityError(ExpansionError):
    """Raised when an abstraction is applied to fewer arguments than its arity."""


@dataclass(frozen=True, slots=True)
class Prim:
    name: str


@dataclass(frozen=True, slots=True)
class Var:
    index: int


@dataclass(frozen=True, slots=True)
class LibRef:
    name: str


@dataclass(frozen=True, slots=True)
class ListHead:
    pass


@dataclass(frozen=True, slots=True)
class App:
    fn: "Expr"
    arg: "Expr"


Expr = Union[Prim, Var, LibRef, ListHead, App]

LIST = ListHead()

# Internal sequence-marker token emitted by ListHead. Never a legal primitive name.
MARK = "\x00"


def spine(e: Expr) -> tuple[Expr, list[Expr]]:
    """Decompose a term into its non-App head and argument list."""
    args: list[Expr] = []
    while isinstance(e, App):
        args.append(e.arg)
        e = e.fn
    args.reverse()
    return e, args


def _build_spine(head: Expr, args: Iterable[Expr]) -> Expr:
    e = head
    for a in args:
        e = App(e, a)
    return e


# ---------------------------------------------------------------------------
# alphabets and cost model


@dataclass(frozen=True)
class PrimitiveAlphabet:
    """Ordered set of primitive stroke names."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        seen = set()
        for n in self.names:
            _check_name(n)
            if n in seen:
                raise ValueError(f"duplicate primitive name: {n!r}")
            seen.add(n)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.names)})

    @property
    def size(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __iter__(self) -> Iterator[str]:
        return iter(self.names)


def _check_name(n: str) -> None:
    if not n or n != n.strip():
        raise ValueError(f"bad symbol name: {n!r}")
    if n == "list" or n.startswith("#"):
        raise ValueError(f"reserved symbol name: {n!r}")
    if any(c in n for c in "()\x00\x01 \t\n"):
        raise ValueError(f"bad symbol name: {n!r}")


# The standard stroke alphabet: 6 basic strokes plus 27 compound (turning)
# strokes, named by the pinyin initials of the stroke names.
CHINESE_STROKES = PrimitiveAlphabet((
    "H", "T", "S", "ST", "P", "SP", "D", "N",
    "HZ", "HP", "HG", "HXG", "HZT", "HZW", "HZG", "HPWG", "HZWG",
    "HZZ", "HZZP", "HZZZ", "HZZZG",
    "SZ", "SW", "SG", "SWG", "SZP", "SZZ", "SZZG",
    "PZ", "PD", "WG", "XG", "BXG",
))


@dataclass(frozen=True)
class CostModel:
    """Description-length weights: one terminal cost per leaf, one per App node."""

    terminal_cost: int = 100
    application_cost: int = 1

    def __post_init__(self) -> None:
        if self.terminal_cost <= 0:
            raise ValueError("terminal_cost must be positive")
        if self.application_cost < 0:
            raise ValueError("application_cost must be non-negative")


def cost(e: Expr, model: CostModel) -> int:
    """Syntactic description length of a term under the cost model."""
    leaves = 0
    apps = 0
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, App):
            apps += 1
            stack.append(x.fn)
            stack.append(x.arg)
        else:
            leaves += 1
    return leaves * model.terminal_cost + apps * model.application_cost


def leaf_count(e: Expr, include_list: bool = True) -> int:
    """Number of Prim/LibRef/ListHead/Var leaves in a term."""
    n = 0
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, App):
            stack.append(x.fn)
            stack.append(x.arg)
        elif isinstance(x, ListHead) and not include_list:
            continue
        else:
            n += 1
    return n


# ---------------------------------------------------------------------------
# abstractions and libraries

# Template token: str (primitive name or MARK) or int (variable index).
TemplateTok = Union[str, int]


@dataclass(frozen=True)
class Abstraction:
    """A named, possibly parameterized reusable sub-program."""

    name: str
    arity: int
    body: Expr

    def __post_init__(self) -> None:
        _check_name(self.name)
        if self.arity < 0:
            raise ValueError("arity must be >= 0")
        if isinstance(self.body, Var):
            raise ValueError(f"{self.name}: identity bodies (a bare variable) are not allowed")


class _FnInfo:
    __slots__ = ("name", "rank", "arity", "template", "suffix_min", "has_mark",
                 "unique_vars", "min_len", "runs", "contributed", "one_var")

    def __init__(self, name: str, rank: int, arity: int, template: tuple[TemplateTok, ...]):
        self.name = name
        self.rank = rank
        self.arity = arity
        self.template = template
        n = len(template)
        suf = [0] * (n + 1)
        for i in range(n - 1, -1, -1):
            suf[i] = suf[i + 1] + 1
        self.suffix_min = tuple(suf)
        self.min_len = suf[0]
        self.has_mark = MARK in template
        counts: dict[int, int] = {}
        for t in template:
            if isinstance(t, int):
                counts[t] = counts.get(t, 0) + 1
        self.unique_vars = all(c == 1 for c in counts.values())
        # single-variable templates align uniquely: fixed literal prefix and
        # suffix around one floating gap
        var_at = [i for i, t in enumerate(template) if isinstance(t, int)]
        if len(var_at) == 1:
            v = var_at[0]
            self.one_var = (template[:v], template[v], template[v + 1:])
        else:
            self.one_var = None
        # literal runs, for fast can-this-possibly-match prefiltering
        runs: list[tuple[str, ...]] = []
        cur: list[str] = []
        for t in template:
            if isinstance(t, str):
                cur.append(t)
            elif cur:
                runs.append(tuple(cur))
                cur = []
        if cur:
            runs.append(tuple(cur))
        self.runs = tuple(runs)
        # strokes the body contributes on its own (vars and marker dropped)
        self.contributed = tuple(t for t in template if isinstance(t, str) and t != MARK)


class Library:
    """Base primitives plus an ordered sequence of learned abstractions.

    Immutable; `extend` returns a new library sharing the existing state.
    Abstraction bodies may reference primitives, `list`, variables below the
    declared arity, and previously defined abstractions only.
    """

    def __init__(self, base: PrimitiveAlphabet, learned: Iterable[Abstraction] = ()):
        self.base = base
        self.learned: tuple[Abstraction, ...] = ()
        self._by_name: dict[str, Abstraction] = {}
        self._info: dict[str, _FnInfo] = {}
        self._seq_index: dict[tuple[str, ...], str] = {}
        self._seq_lens: set[int] = set()
        self._templated: list[_FnInfo] = []
        for fn in learned:
            self._add(fn)

    def _add(self, fn: Abstraction) -> None:
        if fn.name in self._by_name or fn.name in self.base:
            raise ValueError(f"duplicate name in library: {fn.name}")
        template = tuple(self._template_of(fn.body, fn.name))
        if not template:
            raise ValueError(f"{fn.name}: body expands to an empty sequence")
        used = {t for t in template if isinstance(t, int)}
        if used != set(range(fn.arity)):
            raise ValueError(
                f"{fn.name}: body must use exactly #0..#{fn.arity - 1}, got {sorted(used)}")
        if len(template) == 1 and isinstance(template[0], int):
            raise ValueError(f"{fn.name}: identity bodies are not allowed")
        if MARK in template[1:]:
            raise ValueError(f"{fn.name}: list marker not at the front of the body")
        info = _FnInfo(fn.name, len(self.learned), fn.arity, template)
        self.learned = self.learned + (fn,)
        self._by_name[fn.name] = fn
        self._info[fn.name] = info
        if fn.arity == 0:
            self._seq_index.setdefault(template, fn.name)  # earliest definition wins
            self._seq_lens.add(len(template))
        else:
            self._templated.append(info)

    def _template_of(self, body: Expr, owner: str) -> list[TemplateTok]:
        out: list[TemplateTok] = []
        head, args = spine(body)
        if isinstance(head, ListHead):
            out.append(MARK)
        elif isinstance(head, Prim):
            if head.name not in self.base:
                raise ValueError(f"{owner}: unknown primitive {head.name!r}")
            out.append(head.name)
        elif isinstance(head, Var):
            out.append(head.index)
        elif isinstance(head, LibRef):
            info = self._info.get(head.name)
            if info is None:
                raise ValueError(f"{owner}: reference to undefined or later {head.name!r}")
            if len(args) < info.arity:
                raise ArityError(
                    f"{owner}: {head.name} needs {info.arity} argument(s), got {len(args)}")
            bound = [self._template_of(a, owner) for a in args[:info.arity]]
            for t in info.template:
                if isinstance(t, int):
                    out.extend(bound[t])
                else:
                    out.append(t)
            args = args[info.arity:]
        for a in args:
            out.extend(self._template_of(a, owner))
        return out

    def extend(self, fn: Abstraction) -> "Library":
        lib = object.__new__(Library)
        lib.base = self.base
        lib.learned = self.learned
        lib._by_name = dict(self._by_name)
        lib._info = dict(self._info)
        lib._seq_index = dict(self._seq_index)
        lib._seq_lens = set(self._seq_lens)
        lib._templated = list(self._templated)
        lib._add(fn)
        return lib

    def get(self, name: str) -> Abstraction | None:
        return self._by_name.get(name)

    def info(self, name: str) -> _FnInfo:
        return self._info[name]

    def seq_lookup(self, toks: tuple[str, ...]) -> str | None:
        return self._seq_index.get(toks)

    @property
    def templated(self) -> list[_FnInfo]:
        return self._templated

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __len__(self) -> int:
        return len(self.learned)


def library_dl(library: Library, model: CostModel) -> int:
    """Description length of the learned part of a library: sum of body costs."""
    return sum(cost(fn.body, model) for fn in library.learned)


# ---------------------------------------------------------------------------
# expansion


def tokens(e: Expr, library: Library) -> tuple[str, ...]:
    """Token sequence of a term, marker included. Raises on misplaced markers."""
    out = _tokens(e, library, None)
    if MARK in out[1:]:
        raise ExpansionError("list marker occurs past position 0")
    return out


def _tokens(e: Expr, lib: Library, env: tuple[tuple[str, ...], ...] | None) -> tuple[str, ...]:
    head, args = spine(e)
    out: list[str] = []
    if isinstance(head, ListHead):
        out.append(MARK)
    elif isinstance(head, Prim):
        out.append(head.name)
    elif isinstance(head, Var):
        if env is None or head.index >= len(env):
            raise ExpansionError(f"unbound variable #{head.index}")
        out.extend(env[head.index])
    elif isinstance(head, LibRef):
        fn = lib.get(head.name)
        if fn is None:
            raise ExpansionError(f"unresolved reference {head.name!r}")
        if len(args) < fn.arity:
            raise ArityError(
                f"{head.name} needs {fn.arity} argument(s), got {len(args)}")
        bound = tuple(_tokens(a, lib, env) for a in args[:fn.arity])
        tpl = lib.info(head.name).template
        for t in tpl:
            if isinstance(t, int):
                out.extend(bound[t])
            else:
                out.append(t)
        args = args[fn.arity:]
    for a in args:
        out.extend(_tokens(a, lib, env))
    return tuple(out)


def expand(e: Expr, library: Library) -> list[str]:
    """Fully beta-reduced, flattened primitive sequence of a closed term."""
    toks = tokens(e, library)
    if toks and toks[0] == MARK:
        toks = toks[1:]
    return list(toks)


def validate_program(e: Expr, library: Library) -> tuple[str, ...]:
    """Check that a term is a complete glyph program; returns its token sequence."""
    toks = tokens(e, library)
    if not toks or toks[0] != MARK:
        raise ExpansionError("program expansion does not begin with the list marker")
    if len(toks) < 2:
        raise ExpansionError("program expands to an empty stroke sequence")
    return toks


# ---------------------------------------------------------------------------
# corpora


@dataclass
class Corpus:
    """Ordered id -> program map over one primitive alphabet."""

    alphabet: PrimitiveAlphabet
    entries: dict[str, Expr]

    def __post_init__(self) -> None:
        for gid, e in self.entries.items():
            if not isinstance(gid, str) or not gid:
                raise ValueError(f"bad glyph id: {gid!r}")
            for leaf in _leaves(e):
                if isinstance(leaf, Prim) and leaf.name not in self.alphabet:
                    raise ValueError(f"{gid}: primitive {leaf.name!r} not in alphabet")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[str]:
        return iter(self.entries)


def _leaves(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, App):
            stack.append(x.fn)
            stack.append(x.arg)
        else:
            yield x


# ---------------------------------------------------------------------------
# parsing and rendering


def _tokenize(text: str) -> list[str]:
    out: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in "()":
            out.append(c)
            i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            out.append(text[i:j])
            i = j
    return out


def parse(text: str, library: Library) -> Expr:
    """Parse program text into a term over the given library."""
    toks = _tokenize(text)
    if not toks:
        raise ParseError("empty input")
    pos = 0

    def atom(t: str) -> Expr:
        if t == "list":
            return LIST
        if t.startswith("#"):
            if not t[1:].isdigit():
                raise ParseError(f"bad variable {t!r}")
            return Var(int(t[1:]))
        if t in library.base:
            return Prim(t)
        if t in library:
            return LibRef(t)
        raise ParseError(f"unknown atom {t!r}")

    def expr() -> Expr:
        nonlocal pos
        t = toks[pos]
        if t == ")":
            raise ParseError("unexpected ')'")
        if t != "(":
            pos += 1
            return atom(t)
        pos += 1
        items: list[Expr] = []
        while pos < len(toks) and toks[pos] != ")":
            items.append(expr())
        if pos >= len(toks):
            raise ParseError("unbalanced parentheses")
        pos += 1  # consume ')'
        if not items:
            raise ParseError("empty application ()")
        e = items[0]
        for a in items[1:]:
            e = App(e, a)
        return e

    e = expr()
    if pos != len(toks):
        raise ParseError("trailing input after program")
    _reject_nested_lists(e)
    return e


def _reject_nested_lists(e: Expr) -> None:
    stack = [e]
    while stack:
        x = stack.pop()
        if not isinstance(x, App):
            continue
        head, args = spine(x)
        for a in args:
            if isinstance(head, ListHead):
                ahead, _ = spine(a)
                if isinstance(ahead, ListHead):
                    raise ParseError("nested list")
            stack.append(a)


def render(e: Expr) -> str:
    """Program text for a term; inverse of parse up to whitespace."""
    if isinstance(e, App):
        head, args = spine(e)
        parts = [render(head)] + [render(a) for a in args]
        return "(" + " ".join(parts) + ")"
    if isinstance(e, Prim):
        return e.name
    if isinstance(e, LibRef):
        return e.name
    if isinstance(e, Var):
        return f"#{e.index}"
    if isinstance(e, ListHead):
        return "list"
    raise TypeError(f"not a term: {e!r}")


# ---------------------------------------------------------------------------
# library text format


def format_abstraction(fn: Abstraction) -> str:
    params = ", ".join(f"#{i}" for i in range(fn.arity))
    return f"{fn.name}({params}) := {render(fn.body)}"


def write_library(library: Library, path, meta_lines: Iterable[str] = ()) -> None:
    lines = [f"# {m}" for m in meta_lines]
    lines.extend(format_abstraction(fn) for fn in library.learned)
    text = "\n".join(lines) + ("\n" if lines else "")
    from .fileio import atomic_write_text
    atomic_write_text(path, text)


def read_library(path, alphabet: PrimitiveAlphabet = CHINESE_STROKES) -> Library:
    """Read a library definition file (one `name(params) := body` per line)."""
    lib = Library(alphabet)
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                head, _, body_text = line.partition(":=")
                if not _:
                    raise ParseError("missing ':='")
                name, _, params = head.strip().partition("(")
                if not params.endswith(")"):
                    raise ParseError("missing parameter list")
                params = params[:-1].strip()
                declared = [p.strip() for p in params.split(",")] if params else []
                for i, p in enumerate(declared):
                    if p != f"#{i}":
                        raise ParseError(f"parameters must be #0.. in order, got {p!r}")
                body = parse(body_text.strip(), lib)
                lib = lib.extend(Abstraction(name.strip(), len(declared), body))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return lib

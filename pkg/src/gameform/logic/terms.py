"""Term representation for LGDL programs."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Tuple, Union


@dataclass(frozen=True, slots=True)
class Atom:
    name: str

    def __str__(self) -> str:
        return format_atom(self.name)


class Var:
    """A logic variable.

    ``serial`` separates variables that share a source name: every clause
    renaming draws a fresh serial, and each ``_`` in the source gets its own.
    Terms are never mutated after construction; plain slots keep them cheap
    to build, which matters because the solver renames clauses constantly.
    """

    __slots__ = ("name", "serial", "_hash")

    def __init__(self, name: str, serial: int = 0) -> None:
        self.name = name
        self.serial = serial
        self._hash = hash((name, serial))

    def __eq__(self, other: object) -> bool:
        return type(other) is Var and self.serial == other.serial and self.name == other.name

    def __hash__(self) -> int:
        return self._hash

    def __reduce__(self):
        # string hashes differ between processes, so rebuild on unpickle
        return (Var, (self.name, self.serial))

    def __repr__(self) -> str:
        return f"Var({self.name!r}, {self.serial})"

    @property
    def anonymous(self) -> bool:
        return self.name.startswith("_")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Int:
    value: int

    def __str__(self) -> str:
        return str(self.value)


class Struct:
    """A compound term; ``ground`` is computed once at construction."""

    __slots__ = ("functor", "args", "ground")

    def __init__(self, functor: str, args: Tuple["Term", ...]) -> None:
        if not args:
            raise ValueError("compound term needs at least one argument")
        self.functor = functor
        self.args = args
        self.ground = _all_ground(args)

    def __eq__(self, other: object) -> bool:
        return type(other) is Struct and self.functor == other.functor and self.args == other.args

    def __hash__(self) -> int:
        return hash((self.functor, self.args))

    def __reduce__(self):
        return (Struct, (self.functor, self.args))

    def __repr__(self) -> str:
        return f"Struct({self.functor!r}, {self.args!r})"

    @property
    def indicator(self) -> Tuple[str, int]:
        return (self.functor, len(self.args))

    def __str__(self) -> str:
        return f"{format_atom(self.functor)}({','.join(str(a) for a in self.args)})"


class PList:
    """A proper list; LGDL has no head/tail patterns."""

    __slots__ = ("items", "ground")

    def __init__(self, items: Tuple["Term", ...] = ()) -> None:
        self.items = items
        self.ground = _all_ground(items)

    def __eq__(self, other: object) -> bool:
        return type(other) is PList and self.items == other.items

    def __hash__(self) -> int:
        return hash(self.items)

    def __reduce__(self):
        return (PList, (self.items,))

    def __repr__(self) -> str:
        return f"PList({self.items!r})"

    def __str__(self) -> str:
        return "[" + ",".join(str(i) for i in self.items) + "]"


Term = Union[Atom, Var, Int, Struct, PList]


def _all_ground(terms) -> bool:
    for t in terms:
        k = type(t)
        if k is Var or ((k is Struct or k is PList) and not t.ground):
            return False
    return True

_PLAIN_ATOM = re.compile(r"[a-z][A-Za-z0-9_]*\Z")
KEYWORDS = frozenset({"if", "and", "not"})


def format_atom(name: str) -> str:
    if _PLAIN_ATOM.match(name) and name not in KEYWORDS:
        return name
    escaped = name.replace("\\", "\\\\").replace("'", "\\'").replace("\n", "\\n").replace("\t", "\\t")
    return f"'{escaped}'"


def indicator(term: Term) -> Tuple[str, int]:
    if isinstance(term, Struct):
        return term.indicator
    if isinstance(term, Atom):
        return (term.name, 0)
    raise TypeError(f"not callable: {term}")


def variables(term: Term) -> Iterator[Var]:
    """Yield the variables of ``term`` left to right (with repeats)."""
    stack = [term]
    while stack:
        t = stack.pop()
        if isinstance(t, Var):
            yield t
        elif isinstance(t, Struct):
            stack.extend(reversed(t.args))
        elif isinstance(t, PList):
            stack.extend(reversed(t.items))


def is_ground(term: Term) -> bool:
    if type(term) is Var:
        return False
    return getattr(term, "ground", True)


Substitution = Dict[Var, Term]


def substitute(term: Term, s: Substitution) -> Term:
    """Apply ``s`` to ``term``, chasing bindings until a fixpoint."""
    if isinstance(term, Var):
        bound = s.get(term)
        return term if bound is None else substitute(bound, s)
    if isinstance(term, Struct):
        return Struct(term.functor, tuple(substitute(a, s) for a in term.args))
    if isinstance(term, PList):
        return PList(tuple(substitute(i, s) for i in term.items))
    return term


def occurs(v: Var, term: Term, s: Substitution) -> bool:
    for w in variables(term):
        if w == v:
            return True
        bound = s.get(w)
        if bound is not None and occurs(v, bound, s):
            return True
    return False


def unify(a: Term, b: Term, s: Optional[Substitution] = None) -> Optional[Substitution]:
    """Most general unifier of ``a`` and ``b`` extending ``s``, or None.

    The occurs check is always on. The result is idempotent: every binding
    is fully resolved against the others.
    """
    s = dict(s or {})
    pending = [(a, b)]
    while pending:
        x, y = pending.pop()
        x = substitute(x, s) if isinstance(x, Var) else x
        y = substitute(y, s) if isinstance(y, Var) else y
        if x == y:
            continue
        if isinstance(x, Var) or isinstance(y, Var):
            v, t = (x, y) if isinstance(x, Var) else (y, x)
            if v.name == "_":
                continue
            t = substitute(t, s)
            if isinstance(t, Var) and t.name == "_":
                continue
            if v == t:
                continue
            if occurs(v, t, {}):
                return None
            one = {v: t}
            s = {k: substitute(val, one) for k, val in s.items()}
            s[v] = t
        elif isinstance(x, Struct) and isinstance(y, Struct):
            if x.functor != y.functor or len(x.args) != len(y.args):
                return None
            pending.extend(zip(x.args, y.args))
        elif isinstance(x, PList) and isinstance(y, PList):
            if len(x.items) != len(y.items):
                return None
            pending.extend(zip(x.items, y.items))
        else:
            return None
    return s


def atom(name: str) -> Atom:
    return Atom(name)


def struct(functor: str, *args: Union[Term, str, int]) -> Struct:
    """Convenience constructor: str args become atoms, ints become Int."""
    return Struct(functor, tuple(_coerce(a) for a in args))


def _coerce(x: Union[Term, str, int]) -> Term:
    if isinstance(x, bool):
        raise TypeError("booleans are not LGDL terms")
    if isinstance(x, int):
        return Int(x)
    if isinstance(x, str):
        return Atom(x)
    return x

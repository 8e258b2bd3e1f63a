"""Clauses, goals and programs."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple, Union

from .errors import TYPE_ERROR, EngineError
from .terms import Atom, PList, Struct, Term, Var, is_ground, unify, variables

Indicator = Tuple[str, int]

COMPARISONS = (">", "<", ">=", "=<", "=", "\\=")
BUILTINS: Dict[Indicator, str] = {
    ("ground", 1): "ground",
    ("member", 2): "member",
    ("findall", 3): "findall",
    ("rand_member", 2): "rand_member",
}


@dataclass(frozen=True)
class SourceSpan:
    line: int
    col: int
    end_line: int
    end_col: int
    text: str = ""
    source: Optional[str] = None

    @property
    def first_line(self) -> str:
        return self.text.split("\n", 1)[0]


@dataclass(frozen=True)
class Call:
    term: Union[Atom, Struct]

    def __str__(self) -> str:
        return str(self.term)


@dataclass(frozen=True)
class Builtin:
    name: str
    args: Tuple[Term, ...]

    def __str__(self) -> str:
        return str(Struct(self.name, self.args))


@dataclass(frozen=True)
class Compare:
    op: str
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class Not:
    goal: "Goal"

    def __str__(self) -> str:
        return f"not {self.goal}"


Goal = Union[Call, Builtin, Compare, Not]


def goal_from_term(term: Term) -> Goal:
    """Turn a callable term into a goal (used by findall and the host API)."""
    if isinstance(term, Struct):
        if term.functor in COMPARISONS and len(term.args) == 2:
            return Compare(term.functor, term.args[0], term.args[1])
        if term.functor == "not" and len(term.args) == 1:
            return Not(goal_from_term(term.args[0]))
        if term.indicator in BUILTINS:
            return Builtin(term.functor, term.args)
        return Call(term)
    if isinstance(term, Atom):
        return Call(term)
    raise TypeError(f"not a callable term: {term}")


def goal_terms(goal: Goal) -> Tuple[Term, ...]:
    if isinstance(goal, Call):
        return (goal.term,)
    if isinstance(goal, Builtin):
        return goal.args
    if isinstance(goal, Compare):
        return (goal.left, goal.right)
    return goal_terms(goal.goal)


@dataclass(frozen=True)
class Clause:
    head: Union[Atom, Struct]
    body: Tuple[Goal, ...] = ()
    span: Optional[SourceSpan] = field(default=None, compare=False)
    # facts without variables can be used without renaming
    ground_fact: bool = field(default=False, init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ground_fact", not self.body and is_ground(self.head))

    @property
    def indicator(self) -> Indicator:
        if isinstance(self.head, Atom):
            return (self.head.name, 0)
        return self.head.indicator

    @property
    def is_fact(self) -> bool:
        return not self.body

    def variables(self) -> List[Var]:
        seen: Dict[Var, None] = {}
        for v in variables(self.head):
            seen.setdefault(v)
        for g in self.body:
            for t in _all_terms(g):
                for v in variables(t):
                    seen.setdefault(v)
        return list(seen)

    def __str__(self) -> str:
        if not self.body:
            return f"{self.head}."
        goals = " and\n    ".join(str(g) for g in self.body)
        return f"{self.head} if\n    {goals}."


def _all_terms(goal: Goal) -> Tuple[Term, ...]:
    return goal_terms(goal)


class Program:
    """An ordered clause store with a predicate index.

    Static clauses come from source text and are never retracted. Dynamic
    facts are managed by the host (session fluents) and are tried after the
    static clauses of the same predicate.
    """

    def __init__(self, clauses: Iterable[Clause] = ()) -> None:
        self.clauses: List[Clause] = []
        self.index: Dict[Indicator, List[Clause]] = {}
        self.dynamic_facts: Dict[Indicator, List[Clause]] = {}
        self._by_first_arg: Dict[Indicator, tuple] = {}
        for c in clauses:
            self.add_clause(c)

    def add_clause(self, clause: Clause) -> None:
        self.clauses.append(clause)
        self.index.setdefault(clause.indicator, []).append(clause)

    def extend(self, other: "Program") -> "Program":
        for c in other.clauses:
            self.add_clause(c)
        for key, facts in other.dynamic_facts.items():
            self.dynamic_facts.setdefault(key, []).extend(facts)
        return self

    def copy(self) -> "Program":
        p = Program()
        p.clauses = list(self.clauses)
        p.index = {k: list(v) for k, v in self.index.items()}
        p.dynamic_facts = {k: list(v) for k, v in self.dynamic_facts.items()}
        return p

    @classmethod
    def merged(cls, *programs: "Program") -> "Program":
        p = cls()
        for other in programs:
            p.extend(other)
        return p

    def defines(self, key: Indicator) -> bool:
        return key in self.index or key in self.dynamic_facts

    def clauses_for(self, key: Indicator) -> List[Clause]:
        static = self.index.get(key, ())
        dynamic = self.dynamic_facts.get(key, ())
        if not dynamic:
            return list(static)
        return [*static, *dynamic]

    def candidates(self, key: Indicator, first: Optional[Term]) -> List[Clause]:
        """Clauses for ``key`` that can match a goal whose first argument is
        ``first`` (already dereferenced; None or a variable means any).

        The per-predicate index is rebuilt whenever the clause lists change,
        and cached lists are never mutated, so callers may iterate them while
        the program is being updated.
        """
        static = self.index.get(key, ())
        dynamic = self.dynamic_facts.get(key, ())
        stamp = (id(static), len(static), id(dynamic), len(dynamic))
        entry = self._by_first_arg.get(key)
        if entry is None or entry[0] != stamp:
            entry = (stamp, *_first_arg_index([*static, *dynamic]))
            self._by_first_arg[key] = entry
        _, everything, buckets, open_only = entry
        if first is None or type(first) is Var:
            return everything
        return buckets.get(_arg_key(first), open_only)

    def predicates(self) -> List[Indicator]:
        return list(dict.fromkeys([*self.index, *self.dynamic_facts]))

    def assert_fact(self, fact: Union[Clause, Struct, Atom]) -> None:
        if not isinstance(fact, Clause):
            fact = Clause(fact)
        if fact.body:
            raise EngineError(TYPE_ERROR, f"assert_fact expects a fact, got a rule for {fact.indicator[0]}/{fact.indicator[1]}")
        self.dynamic_facts.setdefault(fact.indicator, []).append(fact)

    def retract_matching(self, pattern: Union[Struct, Atom]) -> int:
        """Remove every dynamic fact whose head unifies with ``pattern``."""
        key = Clause(pattern).indicator
        facts = self.dynamic_facts.get(key)
        if not facts:
            return 0
        kept = [f for f in facts if unify(f.head, pattern) is None]
        self.dynamic_facts[key] = kept
        return len(facts) - len(kept)

    def __len__(self) -> int:
        return len(self.clauses)

    def __str__(self) -> str:
        return "\n".join(str(c) for c in self.clauses)


def _arg_key(t: Term):
    k = type(t)
    if k is Struct:
        return (t.functor, len(t.args))
    if k is PList:
        return ("[]", len(t.items))
    return t


def _first_arg_index(clauses: List[Clause]):
    """(all clauses, clauses per first-argument key, clauses open to any key)."""
    firsts = [c.head.args[0] if isinstance(c.head, Struct) else None for c in clauses]
    keys = {_arg_key(f) for f in firsts if f is not None and type(f) is not Var}
    open_only = [c for c, f in zip(clauses, firsts) if f is None or type(f) is Var]
    buckets = {
        k: [c for c, f in zip(clauses, firsts) if f is None or type(f) is Var or _arg_key(f) == k] for k in keys
    }
    return clauses, buckets, open_only


def print_program(program: Program) -> str:
    return "\n".join(str(c) for c in program.clauses) + "\n"

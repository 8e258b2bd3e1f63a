"""Situation Calculus game layer: prelude, agent sessions, move selection
and outcome resolution."""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import List, Optional, Tuple

from .logic import (
    Atom,
    Call,
    Clause,
    EngineError,
    Int,
    ParseErrors,
    Program,
    Struct,
    Term,
    Var,
    check_program,
    parse_program,
    solve,
)

INITIAL = Atom("s0")
ROLES = ("row", "col")


class StrategyFailure(Exception):
    """The strategy produced no move (or an illegal one)."""

    kind = "strategy_failure"


class RuntimeSemanticError(Exception):
    """The game program could not resolve a unique outcome for a move pair."""

    kind = "runtime_semantic_error"


def read_data(*parts: str) -> str:
    path = resources.files("gameform").joinpath("data")
    for part in parts:
        path = path.joinpath(part)
    return path.read_text(encoding="utf-8")


def prelude_source() -> str:
    return read_data("prelude.lgdl")


def prelude_digest() -> str:
    return hashlib.sha256(prelude_source().encode()).hexdigest()


@lru_cache(maxsize=1)
def _prelude() -> Program:
    return parse_program(prelude_source(), "prelude")


def prelude() -> Program:
    """The game-independent clauses (game/2 and holds/2), as a fresh copy."""
    return _prelude().copy()


def load_sources(game_src: str, strategy_src: str = "") -> Program:
    """Parse and merge prelude + game + strategy, labelling errors by origin.

    Raises ParseErrors carrying the errors of both sources.
    """
    game, errors = check_program(game_src, "game")
    strategy, s_errors = check_program(strategy_src, "strategy")
    errors = errors + s_errors
    if errors:
        raise ParseErrors(errors)
    return Program.merged(_prelude(), game, strategy)


@dataclass(frozen=True)
class OutcomeRecord:
    p1: Term
    m1: Term
    u1: int
    p2: Term
    m2: Term
    u2: int

    def payoffs(self) -> Tuple[int, int]:
        return (self.u1, self.u2)

    def to_dict(self) -> dict:
        return {
            "p1": str(self.p1),
            "m1": str(self.m1),
            "u1": self.u1,
            "p2": str(self.p2),
            "m2": str(self.m2),
            "u2": self.u2,
        }


def _as_int(t: Term, what: str) -> int:
    if not isinstance(t, Int):
        raise RuntimeSemanticError(f"{what} is not an integer: {t}")
    return t.value


@dataclass
class AgentSession:
    """One agent's loaded game and strategy plus the fluents it has seen.

    History reaches the strategy as ``initially(last_move(P, M), s0)``
    facts, replaced after every round, so each decision is made from the
    initial situation.
    """

    program: Program
    self_id: Atom
    opp_id: Atom
    role: str
    history: List[Tuple[Term, Term, int]] = field(default_factory=list)
    initial: Term = INITIAL
    max_depth: int = 10_000

    @property
    def round_index(self) -> int:
        return len(self.history)

    def query(self, goal: str | Term | list, rng: Optional[random.Random] = None, **kwargs):
        return solve(self.program, goal, max_depth=self.max_depth, rng=rng, **kwargs)


def new_session(game_src: str, strategy_src: str, self_id: str, opp_id: str, role: str) -> AgentSession:
    if self_id == opp_id:
        raise ValueError("player ids must be distinct")
    if role not in ROLES:
        raise ValueError(f"role must be one of {ROLES}")
    program = load_sources(game_src, strategy_src)
    program.dynamic_facts.setdefault(("initially", 2), [])
    return AgentSession(program, Atom(self_id), Atom(opp_id), role)


def player_ids(program: Program, initial: Term = INITIAL) -> Tuple[str, str]:
    """(row id, col id) as declared by the program's ``role/2`` fluents."""
    ids = []
    for role in ROLES:
        sols = list(solve(program, [_call("holds", Struct("role", (Var("P"), Atom(role))), initial)], max_solutions=1))
        if not sols or not isinstance(sols[0]["P"], Atom):
            raise RuntimeSemanticError(f"no player holds role({role}) in the initial situation")
        ids.append(sols[0]["P"].name)
    return ids[0], ids[1]


def _call(name: str, *args: Term) -> Call:
    return Call(Struct(name, args))


def legal_moves(s: AgentSession) -> List[Term]:
    """Actions legal for this agent in the initial situation, in clause order."""
    goal = _call("legal", Struct("move", (s.self_id, Var("M"))), s.initial)
    out: List[Term] = []
    for sol in s.query([goal]):
        if sol["M"] not in out:
            out.append(sol["M"])
    return out


def select_move(s: AgentSession, rng: Optional[random.Random] = None) -> Term:
    """First answer of ``select(self, opp, s0, M)``."""
    goal = _call("select", s.self_id, s.opp_id, s.initial, Var("M"))
    for sol in s.query([goal], rng=rng, max_solutions=1):
        move = sol["M"]
        if isinstance(move, Var):
            raise StrategyFailure(f"select/4 left the move unbound for {s.self_id}")
        return move
    raise StrategyFailure(f"select/4 found no move for {s.self_id} in round {s.round_index}")


def final_situation(row_id: Term, m_row: Term, col_id: Term, m_col: Term, initial: Term = INITIAL) -> Term:
    """Row moves first; the outcome does not depend on the order."""
    first = Struct("do", (Struct("move", (row_id, m_row)), initial))
    return Struct("do", (Struct("move", (col_id, m_col)), first))


def outcomes_at(program: Program, situation: Term, max_depth: int = 10_000) -> List[OutcomeRecord]:
    vs = [Var(n) for n in ("P1", "M1", "U1", "P2", "M2", "U2")]
    goal = _call("finally", Struct("outcome", tuple(vs)), situation)
    records: List[OutcomeRecord] = []
    for sol in solve(program, [goal], max_depth=max_depth):
        rec = OutcomeRecord(
            sol["P1"], sol["M1"], _as_int(sol["U1"], "row payoff"),
            sol["P2"], sol["M2"], _as_int(sol["U2"], "column payoff"),
        )
        if rec not in records:
            records.append(rec)
    return records


def resolve_outcome(s: AgentSession, m_row: Term, m_col: Term) -> OutcomeRecord:
    if s.role == "row":
        row_id, col_id = s.self_id, s.opp_id
    else:
        row_id, col_id = s.opp_id, s.self_id
    situation = final_situation(row_id, m_row, col_id, m_col, s.initial)
    records = outcomes_at(s.program, situation, s.max_depth)
    if not records:
        raise RuntimeSemanticError(f"no outcome for moves ({m_row}, {m_col})")
    if len(records) > 1:
        raise RuntimeSemanticError(f"{len(records)} different outcomes for moves ({m_row}, {m_col})")
    return records[0]


def update_history(s: AgentSession, my_move: Term, opp_move: Term, my_payoff: int) -> AgentSession:
    s.program.retract_matching(Struct("initially", (Struct("last_move", (Var("_"), Var("_"))), s.initial)))
    s.program.assert_fact(Clause(Struct("initially", (Struct("last_move", (s.self_id, my_move)), s.initial))))
    s.program.assert_fact(Clause(Struct("initially", (Struct("last_move", (s.opp_id, opp_move)), s.initial))))
    s.history.append((my_move, opp_move, my_payoff))
    return s


__all__ = [
    "AgentSession",
    "EngineError",
    "OutcomeRecord",
    "RuntimeSemanticError",
    "StrategyFailure",
    "final_situation",
    "legal_moves",
    "load_sources",
    "new_session",
    "outcomes_at",
    "player_ids",
    "prelude",
    "prelude_digest",
    "prelude_source",
    "read_data",
    "resolve_outcome",
    "select_move",
    "update_history",
]

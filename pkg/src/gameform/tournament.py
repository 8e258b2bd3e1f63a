"""Match scheduling, iterated play, payoff accounting and winner selection."""
from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from .library import payoff_matrix
from .logic import Atom, EngineError, ParseErrors, Term
from .solver import (
    AgentSession,
    RuntimeSemanticError,
    StrategyFailure,
    legal_moves,
    load_sources,
    player_ids,
    resolve_outcome,
    select_move,
    update_history,
)

log = logging.getLogger(__name__)

Schedule = Sequence[Tuple[str, str]]


@dataclass(frozen=True)
class AgentSpec:
    agent_id: str
    game_src: str
    strategy_src: str
    label: str = ""


@dataclass(frozen=True)
class MatchMaker:
    kind: str = "round_robin"
    include_self: bool = True
    pairs: Tuple[Tuple[str, str], ...] = ()

    @classmethod
    def clone(cls) -> "MatchMaker":
        return cls("clone")

    @classmethod
    def round_robin(cls, include_self: bool = True) -> "MatchMaker":
        return cls("round_robin", include_self)

    @classmethod
    def explicit(cls, pairs: Iterable[Tuple[str, str]]) -> "MatchMaker":
        return cls("explicit", False, tuple((a, b) for a, b in pairs))


def make_pairs(mm: MatchMaker, pool: Sequence[AgentSpec]) -> List[Tuple[AgentSpec, AgentSpec]]:
    """Pairings in schedule order; the first agent of each pair plays row."""
    ids = [a.agent_id for a in pool]
    if len(set(ids)) != len(ids):
        raise ValueError("agent ids must be unique within a pool")
    if mm.kind == "clone":
        return [(a, a) for a in pool]
    if mm.kind == "round_robin":
        out = []
        for i, a in enumerate(pool):
            for b in pool[i if mm.include_self else i + 1:]:
                out.append((a, b))
        return out
    if mm.kind == "explicit":
        by_id = {a.agent_id: a for a in pool}
        return [(by_id[x], by_id[y]) for x, y in mm.pairs]
    raise ValueError(f"unknown match maker {mm.kind!r}")


@dataclass
class RoundRecord:
    round: int
    row_move: str
    col_move: str
    row_payoff: int
    col_payoff: int
    row_view: Tuple[int, int]
    col_view: Tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "row_move": self.row_move,
            "col_move": self.col_move,
            "row_payoff": self.row_payoff,
            "col_payoff": self.col_payoff,
            "row_view": list(self.row_view),
            "col_view": list(self.col_view),
        }


@dataclass
class MatchResult:
    row_agent: str
    col_agent: str
    rounds: List[RoundRecord] = field(default_factory=list)
    error: Optional[dict] = None
    warnings: List[str] = field(default_factory=list)
    index: int = 0
    row_bounds: Optional[Tuple[int, int]] = None
    col_bounds: Optional[Tuple[int, int]] = None

    @property
    def totals(self) -> Tuple[int, int]:
        return (sum(r.row_payoff for r in self.rounds), sum(r.col_payoff for r in self.rounds))

    @property
    def is_self_play(self) -> bool:
        return self.row_agent == self.col_agent

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "row_agent": self.row_agent,
            "col_agent": self.col_agent,
            "rounds": [r.to_dict() for r in self.rounds],
            "totals": list(self.totals),
            "error": self.error,
            "warnings": self.warnings,
        }


def _name(t: Term) -> str:
    return t.name if isinstance(t, Atom) else str(t)


def _error_dict(exc: BaseException, round_index: int) -> dict:
    if isinstance(exc, ParseErrors):
        return {
            "kind": "parse_error",
            "message": exc.errors[0].message,
            "round": round_index,
            "trace": [e.format() for e in exc.errors],
        }
    if isinstance(exc, EngineError):
        return {"kind": exc.kind, "message": exc.message, "round": round_index, "trace": [exc.format()]}
    kind = getattr(exc, "kind", type(exc).__name__)
    return {"kind": kind, "message": str(exc), "round": round_index, "trace": []}


def _seat(spec: AgentSpec, role: str) -> AgentSession:
    program = load_sources(spec.game_src, spec.strategy_src)
    program.dynamic_facts.setdefault(("initially", 2), [])
    row_id, col_id = player_ids(program)
    if role == "row":
        return AgentSession(program, Atom(row_id), Atom(col_id), "row")
    return AgentSession(program, Atom(col_id), Atom(row_id), "col")


def _role_bounds(session: AgentSession) -> Optional[Tuple[int, int]]:
    try:
        matrix = payoff_matrix(session.program)
    except EngineError:
        return None
    if not matrix:
        return None
    col = 0 if session.role == "row" else 1
    vals = [v[col] for v in matrix.values()]
    return (min(vals), max(vals))


def play_match(
    a: AgentSpec,
    b: AgentSpec,
    rounds: int,
    rng: Optional[random.Random] = None,
    schedule: Optional[Schedule] = None,
    *,
    strict: bool = False,
    index: int = 0,
) -> MatchResult:
    """Play ``rounds`` rounds with ``a`` as row and ``b`` as column.

    Each agent scores every round with its own game program. With a
    ``schedule`` both strategies are still queried (so a broken strategy
    fails validation) but the scripted moves are played. Errors end the
    match and are recorded; they never propagate.
    """
    rng = rng if rng is not None else random.Random(0)
    rng_a = random.Random(rng.getrandbits(64))
    rng_b = random.Random(rng.getrandbits(64))
    result = MatchResult(a.agent_id, b.agent_id, index=index)
    k = 0
    row_bounds = col_bounds = None
    try:
        row = _seat(a, "row")
        col = _seat(b, "col")
        row_legal = legal_moves(row)
        col_legal = legal_moves(col)
        row_bounds = _role_bounds(row)
        col_bounds = _role_bounds(col)
        for k in range(rounds):
            m_row = select_move(row, rng_a)
            m_col = select_move(col, rng_b)
            if schedule:
                s_row, s_col = schedule[k % len(schedule)]
                m_row, m_col = Atom(s_row), Atom(s_col)
            if m_row not in row_legal:
                raise StrategyFailure(f"illegal move {m_row} for row player")
            if m_col not in col_legal:
                raise StrategyFailure(f"illegal move {m_col} for column player")
            out_row = resolve_outcome(row, m_row, m_col)
            out_col = resolve_outcome(col, m_row, m_col)
            if out_row.payoffs() != out_col.payoffs():
                msg = (
                    f"round {k}: agents disagree on payoffs for ({_name(m_row)}, {_name(m_col)}): "
                    f"{out_row.payoffs()} vs {out_col.payoffs()}"
                )
                if strict:
                    raise RuntimeSemanticError(msg)
                log.warning(msg)
                result.warnings.append(msg)
            result.rounds.append(
                RoundRecord(k, _name(m_row), _name(m_col), out_row.u1, out_col.u2, out_row.payoffs(), out_col.payoffs())
            )
            update_history(row, m_row, m_col, out_row.u1)
            update_history(col, m_col, m_row, out_col.u2)
    except (EngineError, ParseErrors, StrategyFailure, RuntimeSemanticError) as exc:
        result.error = _error_dict(exc, k)
    played = len(result.rounds)
    if row_bounds is not None:
        result.row_bounds = (row_bounds[0] * played, row_bounds[1] * played)
    if col_bounds is not None:
        result.col_bounds = (col_bounds[0] * played, col_bounds[1] * played)
    return result


class BoundsError(ValueError):
    pass


def normalize(total: int, min_total: int, max_total: int) -> Fraction:
    """(total - min) / (max - min) as an exact fraction."""
    if min_total >= max_total:
        raise BoundsError(f"empty payoff range [{min_total}, {max_total}]")
    if not min_total <= total <= max_total:
        raise BoundsError(f"total {total} outside [{min_total}, {max_total}]")
    return Fraction(total - min_total, max_total - min_total)


@dataclass
class TournamentResult:
    seed: int
    rounds: int
    agents: List[str]
    labels: Dict[str, str]
    matches: List[MatchResult]
    targets: Optional[Union[int, Dict[str, int]]] = None

    @property
    def totals(self) -> Dict[str, int]:
        out = {a: 0 for a in self.agents}
        for m in self.matches:
            row_total, col_total = m.totals
            out[m.row_agent] += row_total
            if not m.is_self_play:
                out[m.col_agent] += col_total
        return out

    @property
    def bounds(self) -> Dict[str, Optional[Tuple[int, int]]]:
        lo: Dict[str, Optional[int]] = {a: 0 for a in self.agents}
        hi: Dict[str, Optional[int]] = {a: 0 for a in self.agents}

        def add(agent: str, b: Optional[Tuple[int, int]]) -> None:
            if b is None or lo[agent] is None:
                lo[agent] = hi[agent] = None
            else:
                lo[agent] += b[0]
                hi[agent] += b[1]

        for m in self.matches:
            if not m.rounds:
                continue
            add(m.row_agent, m.row_bounds)
            if not m.is_self_play:
                add(m.col_agent, m.col_bounds)
        return {a: None if lo[a] is None else (lo[a], hi[a]) for a in self.agents}

    @property
    def normalized(self) -> Dict[str, Optional[Fraction]]:
        out: Dict[str, Optional[Fraction]] = {}
        totals, bounds = self.totals, self.bounds
        for a in self.agents:
            b = bounds[a]
            out[a] = normalize(totals[a], *b) if b is not None and b[0] < b[1] else None
        return out

    @property
    def errors(self) -> List[dict]:
        return [dict(m.error, match=m.index) for m in self.matches if m.error]

    def to_dict(self) -> dict:
        norm = self.normalized
        return {
            "seed": self.seed,
            "rounds": self.rounds,
            "agents": [{"id": a, "label": self.labels.get(a, "")} for a in self.agents],
            "totals": self.totals,
            "bounds": {a: list(b) if b else None for a, b in self.bounds.items()},
            "normalized": {a: None if v is None else str(v) for a, v in norm.items()},
            "normalized_float": {a: None if v is None else float(v) for a, v in norm.items()},
            "winners": sorted(select_winners(self, "max_payoff")),
            "target_winners": None if self.targets is None else sorted(select_winners(self, "target_match", self.targets)),
            "matches": [m.to_dict() for m in self.matches],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def round_logs(self) -> Iterator[dict]:
        for m in self.matches:
            for r in m.rounds:
                yield dict(r.to_dict(), match=m.index, row_agent=m.row_agent, col_agent=m.col_agent)


def match_rng(seed: int, index: int) -> random.Random:
    return random.Random(f"{seed}:{index}")


def _play_indexed(args) -> MatchResult:
    i, a, b, rounds, seed, schedule, strict = args
    return play_match(a, b, rounds, match_rng(seed, i), schedule, strict=strict, index=i)


def run_tournament(
    pool: Sequence[AgentSpec],
    rounds: int,
    mm: MatchMaker,
    seed: int = 0,
    targets: Optional[Union[int, Dict[str, int]]] = None,
    *,
    schedule: Optional[Schedule] = None,
    strict: bool = False,
    workers: int = 1,
) -> TournamentResult:
    """Play every pairing of ``mm`` over ``pool``.

    Results do not depend on ``workers``: each match draws its random
    stream from ``(seed, match index)`` alone.
    """
    pairs = make_pairs(mm, pool) if pool else []
    jobs = [(i, a, b, rounds, seed, schedule, strict) for i, (a, b) in enumerate(pairs)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            matches = list(ex.map(_play_indexed, jobs))
    else:
        matches = [_play_indexed(j) for j in jobs]
    matches.sort(key=lambda m: m.index)
    return TournamentResult(
        seed,
        rounds,
        [a.agent_id for a in pool],
        {a.agent_id: a.label for a in pool},
        matches,
        targets,
    )


def select_winners(
    result: TournamentResult,
    mode: str = "max_payoff",
    targets: Optional[Union[int, Mapping[str, int]]] = None,
) -> set:
    totals = result.totals
    if not totals:
        return set()
    if mode == "max_payoff":
        best = max(totals.values())
        return {a for a, t in totals.items() if t == best}
    if mode == "target_match":
        if targets is None:
            raise ValueError("target_match needs targets")
        if isinstance(targets, Mapping):
            return {a for a, t in totals.items() if a in targets and targets[a] == t}
        return {a for a, t in totals.items() if t == targets}
    raise ValueError(f"unknown winner mode {mode!r}")


def write_round_logs(result: TournamentResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in result.round_logs():
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

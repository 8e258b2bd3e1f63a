"""Syntactic, runtime and semantic validation of generated game programs."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .library import GAME_IDS, constraint_source, normalize_game_id, strategy_source
from .logic import Atom, EngineError, Int, PARSE_ERROR, Program, check_program, parse_program, solve
from .solver import _prelude
from .tournament import AgentSpec, MatchResult, play_match

LEVELS = ("syntax", "runtime", "semantic")


class ScheduleError(ValueError):
    pass


class ExtractionError(ValueError):
    pass


@dataclass
class SyntaxReport:
    valid: bool
    errors: List[EngineError] = field(default_factory=list)
    trace: str = ""
    attempts_used: int = 1

    def to_dict(self) -> dict:
        return {
            "level": "syntax",
            "valid": self.valid,
            "attempts_used": self.attempts_used,
            "errors": [e.to_dict() for e in self.errors],
            "trace": self.trace,
        }


def check_syntax(src: str, source: Optional[str] = None) -> SyntaxReport:
    """Parse ``src`` and load it together with the prelude."""
    program, errors = check_program(src, source)
    if program is not None and not program.clauses:
        errors = [EngineError(PARSE_ERROR, "no clauses found", source=source)]
    if not errors:
        Program.merged(_prelude(), program)
        return SyntaxReport(True)
    return SyntaxReport(False, errors, "\n".join(e.format() for e in errors))


def scripted_schedule(actions: Sequence[str]) -> List[Tuple[str, str]]:
    """All four action pairs, one per round, in declaration order."""
    actions = list(dict.fromkeys(actions))
    if len(actions) != 2:
        raise ScheduleError(f"scripted schedule needs exactly 2 actions, got {len(actions)}")
    a1, a2 = actions
    return [(a1, a1), (a1, a2), (a2, a1), (a2, a2)]


@dataclass
class RuntimeReport:
    valid: bool
    rounds_completed: int
    rounds_requested: int
    failure: Optional[dict] = None
    match: Optional[MatchResult] = None

    def to_dict(self) -> dict:
        return {
            "level": "runtime",
            "valid": self.valid,
            "rounds_completed": self.rounds_completed,
            "rounds_requested": self.rounds_requested,
            "failure": self.failure,
        }


def declared_actions(game_src: str) -> List[str]:
    """Actions the row player may take initially, in declaration order."""
    from .solver import legal_moves, load_sources, player_ids, AgentSession

    program = load_sources(game_src)
    row_id, col_id = player_ids(program)
    session = AgentSession(program, Atom(row_id), Atom(col_id), "row")
    return [m.name if isinstance(m, Atom) else str(m) for m in legal_moves(session)]


def validate_runtime(
    game_src: str,
    strategy_src: Optional[str] = None,
    rounds: int = 4,
    *,
    scripted: bool = True,
    seed: int = 0,
) -> RuntimeReport:
    """Play the program against a clone of itself and report the first failure."""
    import random

    from .solver import RuntimeSemanticError

    if strategy_src is None:
        strategy_src = strategy_source("tit_for_tat").source
    schedule = None
    if scripted:
        try:
            schedule = scripted_schedule(declared_actions(game_src))
        except ScheduleError as exc:
            return RuntimeReport(False, 0, rounds, {"kind": "schedule_error", "message": str(exc), "round": 0, "trace": []})
        except (EngineError, RuntimeSemanticError) as exc:
            kind = getattr(exc, "kind", "runtime_semantic_error")
            return RuntimeReport(False, 0, rounds, {"kind": kind, "message": str(exc), "round": 0, "trace": []})
    agent = AgentSpec("agent", game_src, strategy_src)
    match = play_match(agent, agent, rounds, random.Random(seed), schedule, strict=True)
    done = len(match.rounds)
    valid = match.error is None and done == rounds
    return RuntimeReport(valid, done, rounds, match.error, match)


@dataclass(frozen=True)
class TargetOutcomes:
    """Expected payoffs for each action pair, keyed by action names."""

    pairs: Dict[Tuple[str, str], Tuple[int, int]]

    @property
    def totals(self) -> Tuple[int, int]:
        return (sum(v[0] for v in self.pairs.values()), sum(v[1] for v in self.pairs.values()))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "TargetOutcomes":
        pairs = {}
        for a, b, u, v in rows:
            if not (isinstance(u, int) and isinstance(v, int)) or isinstance(u, bool) or isinstance(v, bool):
                raise ValueError(f"target payoffs must be integers: {a}, {b}, {u}, {v}")
            pairs[(str(a), str(b))] = (u, v)
        if len(pairs) != 4:
            raise ValueError(f"targets need 4 distinct action pairs, got {len(pairs)}")
        return cls(pairs)

    def to_rows(self) -> List[list]:
        return [[a, b, u, v] for (a, b), (u, v) in self.pairs.items()]


@dataclass
class SemanticReport:
    valid: bool
    mode: str
    pair_diffs: List[dict] = field(default_factory=list)
    total_diffs: List[dict] = field(default_factory=list)
    observed: Dict[Tuple[str, str], Tuple[int, int]] = field(default_factory=dict)
    runtime: Optional[RuntimeReport] = None
    constraint: Optional["ConstraintReport"] = None

    def to_dict(self) -> dict:
        out = {
            "level": "semantic",
            "mode": self.mode,
            "valid": self.valid,
            "pair_diffs": self.pair_diffs,
            "total_diffs": self.total_diffs,
            "observed": [[a, b, u, v] for (a, b), (u, v) in self.observed.items()],
        }
        if self.constraint is not None:
            out["constraint"] = self.constraint.to_dict()
        return out


def validate_exact(game_src: str, targets: TargetOutcomes, strategy_src: Optional[str] = None) -> SemanticReport:
    """Compare every action pair's payoffs, and both totals, to ``targets``."""
    runtime = validate_runtime(game_src, strategy_src, 4, scripted=True)
    if not runtime.valid:
        return SemanticReport(False, "exact", runtime=runtime)
    observed: Dict[Tuple[str, str], Tuple[int, int]] = {}
    for r in runtime.match.rounds:
        observed[(r.row_move, r.col_move)] = (r.row_payoff, r.col_payoff)
    pair_diffs = []
    for pair, expected in targets.pairs.items():
        got = observed.get(pair)
        if got != expected:
            pair_diffs.append({"pair": list(pair), "expected": list(expected), "observed": None if got is None else list(got)})
    for pair, got in observed.items():
        if pair not in targets.pairs:
            pair_diffs.append({"pair": list(pair), "expected": None, "observed": list(got)})
    total_diffs = []
    got_totals = runtime.match.totals
    for who, exp, got in zip(("row", "col"), targets.totals, got_totals):
        if exp != got:
            total_diffs.append({"agent": who, "expected": exp, "observed": got})
    valid = not pair_diffs and not total_diffs
    return SemanticReport(valid, "exact", pair_diffs, total_diffs, observed, runtime)


@dataclass(frozen=True)
class GameTypeConstraint:
    """Payoff-ordering predicate for one game type, written in LGDL.

    ``action_vars`` are the predicate arguments that get bound to the
    program's action names: cooperate/defect for the symmetric games,
    row up/down and column left/right for the others.
    """

    game_type: str
    predicate: str
    arity: int
    action_vars: Dict[str, int]
    source: str

    @property
    def symmetric(self) -> bool:
        return self.arity == 6

    def query(self):
        from .logic import Struct, Var, Call

        return [Call(Struct(self.predicate, tuple(Var(f"A{i}") for i in range(self.arity))))]


@lru_cache(maxsize=None)
def game_constraint(game_type: str) -> GameTypeConstraint:
    gid = normalize_game_id(game_type)
    if gid in ("PD", "HD", "SH"):
        # valid_xx_payoffs(T, R, P, S, C, D)
        arity, action_vars = 6, {"cooperate": 4, "defect": 5}
    else:
        # valid_xx_payoffs(U, D, L, R)
        arity, action_vars = 4, {"up": 0, "down": 1, "left": 2, "right": 3}
    return GameTypeConstraint(gid, f"valid_{gid.lower()}_payoffs", arity, action_vars, constraint_source(gid))


@lru_cache(maxsize=None)
def _constraint_program(game_type: str) -> Program:
    c = game_constraint(game_type)
    return parse_program(c.source, f"constraint:{c.game_type}")


@dataclass
class ConstraintReport:
    satisfied: bool
    game_type: str
    extracted_matrix: Dict[Tuple[str, str], Tuple[int, int]]
    action_mapping: Optional[Dict[str, str]] = None

    def to_dict(self) -> dict:
        return {
            "satisfied": self.satisfied,
            "game_type": self.game_type,
            "action_mapping": self.action_mapping,
            "extracted_matrix": [[a, b, u, v] for (a, b), (u, v) in self.extracted_matrix.items()],
        }


def _atom_name(t) -> str:
    return t.name if isinstance(t, Atom) else str(t)


def extract_matrix(program: Program) -> Dict[Tuple[str, str], Tuple[int, int]]:
    """The program's four payoff/4 entries; raises ExtractionError otherwise."""
    matrix: Dict[Tuple[str, str], Tuple[int, int]] = {}
    try:
        for sol in solve(program, "payoff(A, B, U, V)"):
            a, b, u, v = sol["A"], sol["B"], sol["U"], sol["V"]
            if not (isinstance(u, Int) and isinstance(v, Int)):
                raise ExtractionError(f"non-integer payoff in payoff({a}, {b}, {u}, {v})")
            key = (_atom_name(a), _atom_name(b))
            if key in matrix:
                raise ExtractionError(f"duplicate payoff entry for {key}")
            matrix[key] = (u.value, v.value)
    except EngineError as exc:
        raise ExtractionError(f"cannot read payoffs: {exc.message}") from exc
    rows = {a for a, _ in matrix}
    cols = {b for _, b in matrix}
    if len(rows) > 2 or len(cols) > 2:
        raise ExtractionError(f"payoffs use more than 2 actions per player: {sorted(rows)} / {sorted(cols)}")
    if len(matrix) != 4 or len(rows) != 2 or len(cols) != 2:
        raise ExtractionError(f"expected 4 payoff entries over 2x2 actions, found {len(matrix)}")
    return matrix


def _matrix_program(matrix: Mapping[Tuple[str, str], Tuple[int, int]]) -> Program:
    from .logic import Clause, struct

    program = Program()
    for (a, b), (u, v) in matrix.items():
        program.add_clause(Clause(struct("payoff", Atom(a), Atom(b), u, v)))
    return program


def validate_constraints(
    game: Union[str, Mapping[Tuple[str, str], Tuple[int, int]]], game_type: str
) -> ConstraintReport:
    """Check a payoff matrix against the ordering that defines ``game_type``.

    ``game`` is either program source, whose payoff/4 entries are extracted
    first, or an already extracted matrix keyed by action names. The
    constraint predicate binds its symbolic actions to the matrix's action
    names by unification, so every assignment of names is searched.
    """
    constraint = game_constraint(game_type)
    if isinstance(game, str):
        parsed, errors = check_program(game, "game")
        if errors:
            raise ExtractionError(f"program does not parse: {errors[0].format()}")
        matrix = extract_matrix(Program.merged(_prelude(), parsed))
    else:
        matrix = dict(game)
    program = Program.merged(_matrix_program(matrix), _constraint_program(constraint.game_type))
    try:
        sols = list(solve(program, constraint.query(), max_solutions=1))
    except EngineError as exc:
        raise ExtractionError(f"constraint check failed: {exc.message}") from exc
    if not sols:
        return ConstraintReport(False, constraint.game_type, matrix)
    mapping = {role: _atom_name(sols[0][f"A{i}"]) for role, i in constraint.action_vars.items()}
    return ConstraintReport(True, constraint.game_type, matrix, mapping)


def validate_semantic_constraints(game_src: str, game_type: str) -> SemanticReport:
    try:
        report = validate_constraints(game_src, game_type)
    except ExtractionError as exc:
        return SemanticReport(False, "constraint", pair_diffs=[{"error": str(exc)}])
    return SemanticReport(report.satisfied, "constraint", observed=report.extracted_matrix, constraint=report)


@dataclass
class PipelineReport:
    """All three validation levels for one program; later levels run only
    when the earlier ones pass."""

    syntax: SyntaxReport
    runtime: Optional[RuntimeReport] = None
    semantic: Optional[SemanticReport] = None

    @property
    def failed_level(self) -> Optional[str]:
        if not self.syntax.valid:
            return "syntax"
        if self.runtime is None or not self.runtime.valid:
            return "runtime"
        if self.semantic is not None and not self.semantic.valid:
            return "semantic"
        return None

    @property
    def syntax_ok(self) -> bool:
        return self.syntax.valid

    @property
    def runtime_ok(self) -> bool:
        return self.syntax_ok and self.runtime is not None and self.runtime.valid

    @property
    def semantic_ok(self) -> bool:
        return self.runtime_ok and self.semantic is not None and self.semantic.valid

    def to_dict(self) -> dict:
        levels = [self.syntax.to_dict()]
        if self.runtime is not None:
            levels.append(self.runtime.to_dict())
        if self.semantic is not None:
            levels.append(self.semantic.to_dict())
        return {"failed_level": self.failed_level, "levels": levels}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def validate_program(
    game_src: str,
    strategy_src: Optional[str] = None,
    *,
    targets: Optional[TargetOutcomes] = None,
    game_type: Optional[str] = None,
) -> PipelineReport:
    """Run syntax, runtime and (exact or constraint) semantic validation."""
    syntax = check_syntax(game_src, "game")
    report = PipelineReport(syntax)
    if not syntax.valid:
        return report
    runtime = validate_runtime(game_src, strategy_src, 4, scripted=True)
    report.runtime = runtime
    if not runtime.valid:
        return report
    if targets is not None:
        report.semantic = validate_exact(game_src, targets, strategy_src)
    elif game_type is not None:
        report.semantic = validate_semantic_constraints(game_src, game_type)
    return report


__all__ = [
    "GAME_IDS",
    "LEVELS",
    "ConstraintReport",
    "ExtractionError",
    "GameTypeConstraint",
    "PipelineReport",
    "RuntimeReport",
    "ScheduleError",
    "SemanticReport",
    "SyntaxReport",
    "TargetOutcomes",
    "check_syntax",
    "declared_actions",
    "extract_matrix",
    "game_constraint",
    "scripted_schedule",
    "validate_constraints",
    "validate_exact",
    "validate_program",
    "validate_runtime",
    "validate_semantic_constraints",
]

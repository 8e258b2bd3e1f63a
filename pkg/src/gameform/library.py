"""Shipped game programs and reference strategies."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

from .logic import Int, Program, parse_program, solve
from .solver import read_data

GAME_IDS = ("PD", "HD", "SH", "BoS", "MP")
GAME_NAMES = {
    "PD": "Prisoner's Dilemma",
    "HD": "Hawk-Dove",
    "SH": "Stag Hunt",
    "BoS": "Battle of the Sexes",
    "MP": "Matching Pennies",
}
STRATEGY_IDS = (
    "anti_default_move",
    "anti_tit_for_tat",
    "best_response",
    "default_move",
    "random",
    "tit_for_tat",
)

PayoffMatrix = Dict[Tuple[str, str], Tuple[int, int]]


@dataclass(frozen=True)
class CanonicalGame:
    id: str
    source: str
    payoff_matrix: PayoffMatrix
    actions: Tuple[str, str]
    default_move: str

    @property
    def name(self) -> str:
        return GAME_NAMES[self.id]


@dataclass(frozen=True)
class StrategyRecord:
    id: str
    source: str
    nl_description: str


def normalize_game_id(game_id: str) -> str:
    for gid in GAME_IDS:
        if gid.lower() == game_id.lower():
            return gid
    raise KeyError(f"unknown game {game_id!r}; expected one of {', '.join(GAME_IDS)}")


def game_source(game_id: str) -> str:
    return read_data("games", f"{normalize_game_id(game_id).lower()}.lgdl")


def payoff_matrix(program: Program) -> PayoffMatrix:
    out: PayoffMatrix = {}
    for sol in solve(program, "payoff(A, B, U, V)"):
        u, v = sol["U"], sol["V"]
        if isinstance(u, Int) and isinstance(v, Int):
            out[(_name(sol["A"]), _name(sol["B"]))] = (u.value, v.value)
    return out


def _name(t) -> str:
    return getattr(t, "name", str(t))


def canonical_game(game_id: str) -> CanonicalGame:
    gid = normalize_game_id(game_id)
    src = game_source(gid)
    program = parse_program(src, gid.lower())
    actions: List[str] = []
    for clause in program.index[("possible", 2)]:
        move = clause.head.args[0]
        action = _name(move.args[1])
        if action not in actions:
            actions.append(action)
    default = next(solve(program, "initially(default_move(p1, M), s0)"))["M"]
    return CanonicalGame(gid, src, payoff_matrix(program), (actions[0], actions[1]), _name(default))


def strategy_source(strategy_id: str) -> StrategyRecord:
    if strategy_id not in STRATEGY_IDS:
        raise KeyError(f"unknown strategy {strategy_id!r}; expected one of {', '.join(STRATEGY_IDS)}")
    src = read_data("strategies", f"{strategy_id}.lgdl")
    header = src.split("\n", 1)[0]
    return StrategyRecord(strategy_id, src, header.lstrip("% ").strip())


def constraint_source(game_id: str) -> str:
    return read_data("constraints", f"{normalize_game_id(game_id).lower()}.lgdl")

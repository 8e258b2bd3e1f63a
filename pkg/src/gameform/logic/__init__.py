"""LGDL: the small logic language game rules and strategies are written in."""
from .engine import DEFAULT_MAX_DEPTH, Engine, holds, solve, solve_all
from .errors import (
    DEPTH_LIMIT,
    EXISTENCE_ERROR,
    INSTANTIATION_ERROR,
    PARSE_ERROR,
    TYPE_ERROR,
    EngineError,
    ParseErrors,
)
from .parser import check_program, parse_program, parse_query, parse_term, tokenize
from .program import Builtin, Call, Clause, Compare, Goal, Not, Program, SourceSpan, print_program
from .terms import Atom, Int, PList, Struct, Term, Var, is_ground, struct, substitute, unify

__all__ = [
    "Atom", "Builtin", "Call", "Clause", "Compare", "DEFAULT_MAX_DEPTH", "DEPTH_LIMIT",
    "EXISTENCE_ERROR", "Engine", "EngineError", "Goal", "INSTANTIATION_ERROR", "Int", "Not",
    "PARSE_ERROR", "PList", "ParseErrors", "Program", "SourceSpan", "Struct", "TYPE_ERROR",
    "Term", "Var", "check_program", "holds", "is_ground", "parse_program", "parse_query",
    "parse_term", "print_program", "solve", "solve_all", "struct", "substitute", "tokenize", "unify",
]

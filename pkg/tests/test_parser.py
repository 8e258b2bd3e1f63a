"""Parsing, printing and syntax diagnostics."""
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

import gameform
from gameform.logic import (
    Atom,
    Builtin,
    Call,
    Clause,
    Compare,
    Int,
    Not,
    ParseErrors,
    Program,
    Struct,
    Var,
    check_program,
    parse_program,
    parse_query,
    parse_term,
    print_program,
)

from strategies import any_terms

DATA = Path(gameform.__file__).parent / "data"
CORPUS = sorted(DATA.rglob("*.lgdl"))


def errors_of(src):
    prog, errs = check_program(src, "t")
    return [(e.line, e.col, e.message, e.line_text) for e in errs]


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_shipped_sources_parse(path):
    prog = parse_program(path.read_text(), path.name)
    assert prog.clauses


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
def test_shipped_sources_round_trip(path):
    prog = parse_program(path.read_text())
    again = parse_program(print_program(prog))
    assert _alpha(again) == _alpha(prog)


def _alpha(prog: Program):
    # anonymous variables get parse-local serials; compare up to renaming
    return [str(c) for c in prog.clauses]


def test_clause_structure():
    (c,) = parse_program("a(X) if b(X, _) and not c(X) and X >= -2 and findall(Y, d(Y), L).").clauses
    assert c.head == Struct("a", (Var("X"),))
    b, n, cmp_, fa = c.body
    assert isinstance(b, Call) and b.term.functor == "b"
    assert isinstance(n, Not) and isinstance(n.goal, Call)
    assert cmp_ == Compare(">=", Var("X"), Int(-2))
    assert isinstance(fa, Builtin) and fa.name == "findall"


def test_each_underscore_is_a_fresh_variable():
    (c,) = parse_program("p(_, _).").clauses
    a, b = c.head.args
    assert a.name == b.name == "_" and a != b


def test_atoms_quoted_and_plain():
    assert parse_term("'C'") == Atom("C")
    assert parse_term("'it''s'") == Atom("it's")
    assert parse_term("'a\\nb'") == Atom("a\nb")
    assert parse_term("move(p1, 'D')") == Struct("move", (Atom("p1"), Atom("D")))
    assert parse_term("[1, -2, x]").items == (Int(1), Int(-2), Atom("x"))


def test_query_accepts_commas_and_prompt():
    goals = parse_query("?- game(s0,F), finally(goal(p1,5),F).")
    assert [g.term.functor for g in goals] == ["game", "finally"]
    assert parse_query("a(X) and b(X)") == parse_query("a(X), b(X)")


def test_missing_period_points_at_clause():
    assert errors_of("a(X) if b(X)\nb(1).") == [(1, 13, "missing '.' at end of clause", "a(X) if b(X)")]


def test_end_of_input_has_no_line():
    (err,) = check_program("a(X) if b(X) and", "t")[1]
    assert err.line is None and err.line_text is None
    assert err.format() == "t:eof: parse_error: unexpected end of file"


@pytest.mark.parametrize(
    "src, fragment",
    [
        ("p :- q.", "':-' is not LGDL"),
        ("a(X) if b(X), c(X).", "use 'and' for conjunction"),
        ("a(X) if // note\n  b.", "comments start with '%'"),
        ('a("x").', "double-quoted"),
        ("a('x).", "unterminated quoted atom"),
        ("X(a).", "clause head must be"),
        ("member(a, b).", "cannot redefine builtin"),
        ("a([H|T]).", "list patterns are not LGDL"),
        ("a(1.5).", "only integers"),
    ],
)
def test_diagnostics(src, fragment):
    errs = errors_of(src)
    assert len(errs) == 1
    line, col, message, text = errs[0]
    assert fragment in message
    assert line == 1 and text == src.splitlines()[0]


def test_recovery_reports_every_bad_clause():
    src = "a(X) if b(X), c.\nok(1).\np :- q.\nalso_ok.\nlast(X) if X > 1\n"
    errs = errors_of(src)
    assert [e[0] for e in errs] == [1, 3, None]


def test_parse_program_raises_with_all_errors():
    with pytest.raises(ParseErrors) as info:
        parse_program("a :- b.\nc :- d.")
    assert len(info.value.errors) == 2


names = st.sampled_from(["p", "q", "r"])


@st.composite
def clauses(draw):
    head = Struct(draw(names), tuple(draw(st.lists(any_terms, min_size=1, max_size=3))))
    body = []
    for _ in range(draw(st.integers(0, 3))):
        kind = draw(st.sampled_from(["call", "not", "cmp"]))
        call = Call(Struct(draw(names), (draw(any_terms),)))
        if kind == "call":
            body.append(call)
        elif kind == "not":
            body.append(Not(call))
        else:
            body.append(Compare(draw(st.sampled_from([">", "<", ">=", "=<", "=", "\\="])), draw(any_terms), draw(any_terms)))
    return Clause(head, tuple(body))


@given(st.lists(clauses(), min_size=1, max_size=5))
def test_printed_programs_parse_back(cs):
    prog = Program()
    for c in cs:
        prog.add_clause(c)
    assert parse_program(print_program(prog)).clauses == cs

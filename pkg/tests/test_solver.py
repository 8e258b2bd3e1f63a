"""Game layer: the shared prelude, sessions, outcomes and history."""
import hashlib
import random
from pathlib import Path

import pytest

from gameform.library import GAME_IDS, canonical_game, strategy_source
from gameform.logic import Atom, ParseErrors, Struct, parse_term, solve_all
from gameform.solver import (
    RuntimeSemanticError,
    StrategyFailure,
    final_situation,
    legal_moves,
    load_sources,
    new_session,
    outcomes_at,
    player_ids,
    prelude_digest,
    prelude_source,
    resolve_outcome,
    select_move,
    update_history,
)

PINNED = Path(__file__).parent / "fixtures" / "prelude.sha256"


def test_prelude_is_pinned():
    # the shared clauses feed every experiment, so edits must be deliberate
    assert prelude_digest() == hashlib.sha256(prelude_source().encode()).hexdigest()
    assert prelude_digest() == PINNED.read_text().strip()


def test_prelude_defines_game_and_holds():
    prog = load_sources("")
    assert set(prog.predicates()) >= {("game", 2), ("holds", 2)}


def session(game="PD", strategy="tit_for_tat", role="row"):
    me, other = ("p1", "p2") if role == "row" else ("p2", "p1")
    return new_session(canonical_game(game).source, strategy_source(strategy).source, me, other, role)


def test_player_ids_come_from_roles():
    assert player_ids(load_sources(canonical_game("HD").source)) == ("p1", "p2")


@pytest.mark.parametrize("gid", GAME_IDS)
def test_legal_moves_in_declaration_order(gid):
    assert tuple(m.name for m in legal_moves(session(gid))) == canonical_game(gid).actions


def test_final_situation_shape():
    f = final_situation(Atom("p1"), Atom("D"), Atom("p2"), Atom("C"))
    assert f == parse_term("do(move(p2,'C'),do(move(p1,'D'),s0))")


@pytest.mark.parametrize("gid", GAME_IDS)
def test_outcomes_do_not_depend_on_who_moves_first(gid):
    game = canonical_game(gid)
    prog = load_sources(game.source)
    for (a, b), pay in game.payoff_matrix.items():
        row_first = final_situation(Atom("p1"), Atom(a), Atom("p2"), Atom(b))
        col_first = Struct("do", (Struct("move", (Atom("p1"), Atom(a))), Struct("do", (Struct("move", (Atom("p2"), Atom(b))), Atom("s0")))))
        (x,) = outcomes_at(prog, row_first)
        (y,) = outcomes_at(prog, col_first)
        assert x == y and x.payoffs() == pay


def test_tit_for_tat_follows_history():
    s = session()
    assert select_move(s) == Atom("C")
    update_history(s, Atom("C"), Atom("D"), 0)
    assert select_move(s) == Atom("D")
    update_history(s, Atom("D"), Atom("C"), 5)
    assert select_move(s) == Atom("C")
    # only the latest round is visible
    facts = solve_all(s.program, "initially(last_move(P, M), s0)")
    assert len(facts) == 2 and s.round_index == 2


def test_missing_payoff_is_a_runtime_error():
    src = canonical_game("PD").source.replace("payoff('D', 'D', 1, 1).\n", "")
    s = new_session(src, strategy_source("tit_for_tat").source, "p1", "p2", "row")
    with pytest.raises(RuntimeSemanticError, match="no outcome"):
        resolve_outcome(s, Atom("D"), Atom("D"))


def test_ambiguous_payoff_is_a_runtime_error():
    src = canonical_game("PD").source + "\npayoff('D', 'D', 2, 2).\n"
    s = new_session(src, strategy_source("tit_for_tat").source, "p1", "p2", "row")
    with pytest.raises(RuntimeSemanticError, match="different outcomes"):
        resolve_outcome(s, Atom("D"), Atom("D"))


def test_strategy_without_answer_fails():
    s = new_session(canonical_game("PD").source, "select(P, O, S, M) if 1 > 2.", "p1", "p2", "row")
    with pytest.raises(StrategyFailure):
        select_move(s)


def test_parse_errors_name_their_source():
    with pytest.raises(ParseErrors) as info:
        load_sources("a :- b.", "c :- d.")
    assert [e.source for e in info.value.errors] == ["game", "strategy"]


def test_session_rejects_bad_arguments():
    with pytest.raises(ValueError):
        new_session("", "", "p1", "p1", "row")
    with pytest.raises(ValueError):
        new_session("", "", "p1", "p2", "middle")


def test_random_strategy_uses_given_rng():
    s = session(strategy="random")
    a = [select_move(s, random.Random(3)).name for _ in range(5)]
    b = [select_move(s, random.Random(3)).name for _ in range(5)]
    assert a == b

"""Syntax, runtime and semantic validation."""
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gameform.library import GAME_IDS, canonical_game
from gameform.validation import (
    ExtractionError,
    ScheduleError,
    TargetOutcomes,
    check_syntax,
    declared_actions,
    scripted_schedule,
    validate_constraints,
    validate_exact,
    validate_program,
    validate_runtime,
)

from oracles import ASYMMETRIC_ORDER, SYMMETRIC_ORDER, asymmetric_matrix, brute_force_satisfies, game_source, symmetric_matrix

PD = canonical_game("PD").source
PD_TARGETS = TargetOutcomes.from_rows([["C", "C", 3, 3], ["C", "D", 0, 5], ["D", "C", 5, 0], ["D", "D", 1, 1]])


def test_syntax_report_lists_every_error():
    report = check_syntax("a :- b.\nc(X) if d(X), e.\n", "gen")
    assert not report.valid and len(report.errors) == 2
    assert report.trace.splitlines()[0].startswith("gen:1:3: parse_error")


def test_empty_program_is_invalid():
    assert not check_syntax("% nothing here\n").valid


def test_scripted_schedule_covers_all_pairs():
    assert scripted_schedule(["D", "C"]) == [("D", "D"), ("D", "C"), ("C", "D"), ("C", "C")]
    with pytest.raises(ScheduleError):
        scripted_schedule(["a", "b", "c"])


def test_declared_actions():
    assert declared_actions(PD) == ["D", "C"]


def test_runtime_valid_for_every_canonical_game():
    for gid in GAME_IDS:
        report = validate_runtime(canonical_game(gid).source)
        assert report.valid and report.rounds_completed == 4, gid


def test_runtime_failure_names_round_and_kind():
    broken = PD.replace("payoff('C', 'C', 3, 3).\n", "")
    report = validate_runtime(broken)
    assert not report.valid
    assert report.failure["kind"] == "runtime_semantic_error"
    assert report.rounds_completed == 3


def test_runtime_catches_three_actions():
    extra = PD.replace("possible(move(P,'C'),S)", "possible(move(P,'X'),S) if holds(player(P),S).\npossible(move(P,'C'),S)", 1)
    report = validate_runtime(extra)
    assert not report.valid and report.failure["kind"] == "schedule_error"


def test_exact_validation_accepts_canonical_pd():
    report = validate_exact(PD, PD_TARGETS)
    assert report.valid and report.runtime.match.totals == (9, 9) == PD_TARGETS.totals


def test_exact_validation_reports_each_wrong_pair():
    wrong = PD.replace("payoff('D', 'C', 5, 0).", "payoff('D', 'C', 4, 0).")
    report = validate_exact(wrong, PD_TARGETS)
    assert not report.valid
    assert report.pair_diffs == [{"pair": ["D", "C"], "expected": [5, 0], "observed": [4, 0]}]
    assert report.total_diffs == [{"agent": "row", "expected": 9, "observed": 8}]


def test_exact_validation_is_strict_about_action_names():
    renamed = TargetOutcomes.from_rows([["c", "c", 3, 3], ["c", "d", 0, 5], ["d", "c", 5, 0], ["d", "d", 1, 1]])
    report = validate_exact(PD, renamed)
    assert not report.valid and len(report.pair_diffs) == 8


def test_targets_need_four_integer_pairs():
    with pytest.raises(ValueError):
        TargetOutcomes.from_rows([["C", "C", 3, 3]])
    with pytest.raises(ValueError):
        TargetOutcomes.from_rows([["C", "C", 3.5, 3], ["C", "D", 0, 5], ["D", "C", 5, 0], ["D", "D", 1, 1]])


@pytest.mark.parametrize("gid", GAME_IDS)
def test_each_canonical_game_meets_only_its_own_constraints(gid):
    src = canonical_game(gid).source
    assert {t for t in GAME_IDS if validate_constraints(src, t).satisfied} == {gid}


def test_constraint_report_maps_actions():
    report = validate_constraints(canonical_game("HD").source, "HD")
    assert report.action_mapping == {"cooperate": "dove", "defect": "hawk"}


@pytest.mark.parametrize(
    "edit, message",
    [
        (lambda s: s + "\npayoff('C', 'C', 3, 3).\n", "duplicate"),
        (lambda s: s.replace("payoff('D', 'D', 1, 1).", "payoff('D', 'D', one, 1)."), "non-integer"),
        (lambda s: s.replace("payoff('D', 'D', 1, 1).\n", ""), "expected 4"),
        (lambda s: s + "\npayoff('X', 'C', 3, 3).\n", "more than 2"),
    ],
)
def test_extraction_errors(edit, message):
    with pytest.raises(ExtractionError, match=message):
        validate_constraints(edit(PD), "PD")


symmetric_values = st.tuples(*[st.integers(0, 5)] * 4)


@given(symmetric_values, st.sampled_from(sorted(SYMMETRIC_ORDER)), st.integers(0, 10**6))
def test_constraints_agree_with_brute_force_symmetric(values, game_type, seed):
    matrix = symmetric_matrix(*values, random.Random(seed))
    assert validate_constraints(matrix, game_type).satisfied == brute_force_satisfies(matrix, game_type)


@given(st.sampled_from(sorted(ASYMMETRIC_ORDER)), st.integers(0, 10**6))
def test_constraints_agree_with_brute_force_asymmetric(game_type, seed):
    matrix = asymmetric_matrix(random.Random(seed))
    assert validate_constraints(matrix, game_type).satisfied == brute_force_satisfies(matrix, game_type)


@given(symmetric_values, st.sampled_from(GAME_IDS), st.integers(0, 10**6))
def test_source_and_matrix_paths_agree(values, game_type, seed):
    matrix = symmetric_matrix(*values, random.Random(seed))
    src = game_source(matrix, PD)
    assert validate_constraints(src, game_type).satisfied == validate_constraints(matrix, game_type).satisfied


def test_pipeline_stops_at_first_failing_level():
    assert validate_program("a :- b.").failed_level == "syntax"
    assert validate_program(PD.replace("payoff('C', 'C', 3, 3).\n", ""), targets=PD_TARGETS).failed_level == "runtime"
    wrong = PD.replace("payoff('C', 'C', 3, 3).", "payoff('C', 'C', 0, 0).")
    assert validate_program(wrong, targets=PD_TARGETS).failed_level == "semantic"
    assert validate_program(wrong, game_type="PD").failed_level == "semantic"
    assert validate_program(PD, targets=PD_TARGETS).failed_level is None

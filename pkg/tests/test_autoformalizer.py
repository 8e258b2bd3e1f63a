"""Prompting, code extraction, the self-correction loop and chat backends."""
import json

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gameform.autoformalizer import (
    EXHAUSTED_MESSAGE,
    EmptyCode,
    LlmParams,
    PromptBundle,
    autoformalize,
    build_game_prompt,
    build_strategy_prompt,
    extract_code,
    game_bundle,
    self_correct_prompt,
    strategy_bundle,
)
from gameform.backends import (
    BackendError,
    FixtureMissing,
    FixtureStore,
    HttpChatBackend,
    HttpMessagesBackend,
    RecordingBackend,
    ReplayBackend,
    ScriptedBackend,
    make_backend,
    request_digest,
)
from gameform.library import canonical_game
from gameform.validation import check_syntax

PD = canonical_game("PD").source
BROKEN = PD.replace("initial(s0).", "initial(s0)", 1)


def test_bundle_fields_must_be_filled():
    with pytest.raises(ValueError):
        game_bundle("   ")
    with pytest.raises(ValueError):
        PromptBundle("g", "n", "c", "t", kind="poem")


def test_prompts_are_deterministic():
    a = build_game_prompt(game_bundle("A story."))
    b = build_game_prompt(game_bundle("A story."))
    assert a == b
    assert request_digest(a, {"x": 1}) == request_digest(b, {"x": 1})
    assert request_digest(a, {"x": 1}) != request_digest(a, {"x": 2})


def test_prompt_contains_every_part():
    bundle = game_bundle("Two cats and one sunny windowsill.")
    system, user = build_game_prompt(bundle)
    assert system["role"] == "system" and "only" in system["content"]
    for part in (bundle.gamma.strip(), bundle.nl_example, bundle.code_example, bundle.nl_target):
        assert part in user["content"]


def test_game_and_strategy_prompts_differ_in_example_and_framing():
    g = build_game_prompt(game_bundle("Always defect."))
    s = build_strategy_prompt(strategy_bundle("Always defect."))
    assert g != s
    assert "select(" in s[1]["content"] and "strategy" in s[1]["content"]
    with pytest.raises(ValueError):
        build_strategy_prompt(game_bundle("x"))


def test_extract_fenced_blocks():
    assert extract_code("Sure!\n```prolog\na(1).\n```\nand\n```\nb(2).\n```\nDone.") == "a(1).\nb(2).\n"


def test_extract_strips_surrounding_prose():
    assert extract_code("Here is the code:\na(1).\nb(X) if\n    a(X).\nHope this helps!") == "a(1).\nb(X) if\n    a(X).\n"


def test_extract_keeps_comments():
    assert extract_code("% rules\na(1).") == "% rules\na(1).\n"


@pytest.mark.parametrize("text", ["I cannot help with that.", "", "```\n% only a comment\n```"])
def test_extract_nothing(text):
    with pytest.raises(EmptyCode):
        extract_code(text)


def test_feedback_quotes_the_offending_line():
    report = check_syntax(BROKEN)
    (system, user) = self_correct_prompt(BROKEN, report, game_bundle("x"))
    content = user["content"]
    assert "missing '.' at end of clause" in content
    assert "offending line: initial(s0)" in content
    assert BROKEN.strip() in content


def test_feedback_for_end_of_input_shows_last_lines():
    code = "a(1).\nb(2).\nc(X) if\n    b(X) and"
    report = check_syntax(code)
    assert report.errors[0].line is None
    content = self_correct_prompt(code, report, game_bundle("x"))[1]["content"]
    assert "unexpected end of file" in content
    assert "the code ends with:\n    b(2).\n    c(X) if\n        b(X) and" in content


def test_feedback_needs_a_failing_report():
    with pytest.raises(ValueError):
        self_correct_prompt(PD, check_syntax(PD), game_bundle("x"))


def test_params_validate():
    with pytest.raises(ValueError):
        LlmParams(max_attempts=0)


@given(st.lists(st.booleans(), min_size=1, max_size=8), st.integers(1, 6))
def test_loop_never_exceeds_max_attempts(valid_flags, max_attempts):
    backend = ScriptedBackend([PD if ok else BROKEN for ok in valid_flags] + [BROKEN] * 8)
    log = autoformalize(game_bundle("x"), backend, LlmParams(max_attempts=max_attempts))
    assert backend.calls == log.attempts_used <= max_attempts
    first_ok = valid_flags.index(True) + 1 if True in valid_flags else None
    if first_ok is not None and first_ok <= max_attempts:
        assert log.status == "success" and log.attempts_used == first_ok
        assert check_syntax(log.code).valid
    else:
        assert log.status == "exhausted" and log.message == EXHAUSTED_MESSAGE
        assert log.attempts_used == max_attempts


def test_later_attempts_are_fresh_conversations():
    seen = []

    class Spy(ScriptedBackend):
        def complete(self, messages, params):
            seen.append((messages, params))
            return super().complete(messages, params)

    autoformalize(game_bundle("x"), Spy([BROKEN, PD]))
    assert all(len(m) == 2 for m, _ in seen)
    assert "rejected" in seen[1][0][1]["content"]
    assert [p["attempt"] for _, p in seen] == [1, 2]


def test_backend_error_keeps_the_log():
    with pytest.raises(BackendError) as info:
        autoformalize(game_bundle("x"), ScriptedBackend([BROKEN]))
    assert info.value.log.attempts_used == 1


def test_record_then_replay_is_identical(tmp_path, no_network):
    bundle = game_bundle("x")
    recorded = autoformalize(bundle, RecordingBackend(ScriptedBackend([BROKEN, PD]), tmp_path))
    replay = ReplayBackend(tmp_path)
    replayed = autoformalize(bundle, replay)
    assert json.dumps(replayed.to_dict(), sort_keys=True) == json.dumps(recorded.to_dict(), sort_keys=True)
    assert replay.calls == 2 and not no_network


def test_replay_without_fixture(tmp_path):
    with pytest.raises(FixtureMissing):
        ReplayBackend(tmp_path).complete([{"role": "user", "content": "hi"}], {})


def test_fixture_files_hold_request_and_response(tmp_path):
    store = FixtureStore(tmp_path)
    msgs = [{"role": "user", "content": "hi"}]
    path = store.put(msgs, {"a": 1}, "reply")
    record = json.loads(path.read_text())
    assert path.stem == record["digest"] == request_digest(msgs, {"a": 1})
    assert record["request"]["messages"] == msgs and record["response"] == "reply"
    assert store.get(msgs, {"a": 1}) == "reply"


def _client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_chat_completions_wire_format():
    seen = {}

    def handler(request):
        seen["auth"] = request.headers["authorization"]
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json={"choices": [{"message": {"content": "a(1)."}}]})

    backend = HttpChatBackend("http://llm.test/v1/chat", "k3y", "m1", client=_client(handler))
    out = backend.complete([{"role": "system", "content": "s"}, {"role": "user", "content": "u"}], {"temperature": 1.0, "max_output_tokens": 2048})
    assert out == "a(1)."
    assert seen["auth"] == "Bearer k3y"
    assert seen["body"]["model"] == "m1" and seen["body"]["max_tokens"] == 2048
    assert [m["role"] for m in seen["body"]["messages"]] == ["system", "user"]


def test_messages_wire_format():
    seen = {}

    def handler(request):
        seen["body"] = json.loads(request.content)
        return httpx.Response(200, json={"content": [{"type": "text", "text": "a(1)."}, {"type": "text", "text": "\nb(2)."}]})

    backend = HttpMessagesBackend("http://llm.test/v1/messages", "k", "m", client=_client(handler))
    out = backend.complete([{"role": "system", "content": "s"}, {"role": "user", "content": "u"}], {})
    assert out == "a(1).\nb(2)."
    assert seen["body"]["system"] == "s" and [m["role"] for m in seen["body"]["messages"]] == ["user"]


def test_transient_failures_are_retried():
    statuses = iter([429, 503, 200])

    def handler(request):
        code = next(statuses)
        if code != 200:
            return httpx.Response(code, text="busy")
        return httpx.Response(200, json={"choices": [{"message": {"content": "ok."}}]})

    backend = HttpChatBackend("http://llm.test", "k", "m", backoff=0, client=_client(handler))
    assert backend.complete([{"role": "user", "content": "u"}], {}) == "ok."


def test_client_errors_are_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(401, text="bad key")

    backend = HttpChatBackend("http://llm.test", "k", "m", backoff=0, client=_client(handler))
    with pytest.raises(BackendError, match="401"):
        backend.complete([{"role": "user", "content": "u"}], {})
    assert len(calls) == 1


def test_retries_give_up():
    def handler(request):
        raise httpx.ConnectError("down", request=request)

    backend = HttpChatBackend("http://llm.test", "k", "m", retries=2, backoff=0, client=_client(handler))
    with pytest.raises(BackendError, match="3 tries"):
        backend.complete([{"role": "user", "content": "u"}], {})


def test_endpoint_from_environment(monkeypatch):
    monkeypatch.setenv("GAMEFORM_LLM_ENDPOINT", "http://env.test")
    monkeypatch.setenv("GAMEFORM_LLM_API_KEY", "secret")
    backend = make_backend("http")
    assert backend.endpoint == "http://env.test" and backend.headers()["authorization"] == "Bearer secret"
    monkeypatch.delenv("GAMEFORM_LLM_ENDPOINT")
    with pytest.raises(BackendError):
        make_backend("http")


def test_make_backend_kinds(tmp_path):
    assert isinstance(make_backend("replay", tmp_path), ReplayBackend)
    with pytest.raises(BackendError):
        make_backend("replay")
    with pytest.raises(BackendError):
        make_backend("carrier-pigeon")

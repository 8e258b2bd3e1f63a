"""Translate natural-language games and strategies into LGDL with an LLM,
feeding syntax errors back until the code parses or attempts run out."""
from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from string import Template
from typing import List, Optional

from .backends import BackendError, ChatBackend, Message, request_digest
from .library import canonical_game, strategy_source
from .logic import EngineError, PARSE_ERROR
from .solver import prelude_source, read_data
from .validation import SyntaxReport, check_syntax

EXHAUSTED_MESSAGE = "Unable to generate valid predicates within maximum attempts."
KINDS = ("game", "strategy")


class EmptyCode(ValueError):
    """The response contained nothing that looks like LGDL clauses."""


@dataclass(frozen=True)
class PromptBundle:
    gamma: str
    nl_example: str
    code_example: str
    nl_target: str
    kind: str = "game"

    def __post_init__(self) -> None:
        for name in ("gamma", "nl_example", "code_example", "nl_target"):
            if not getattr(self, name).strip():
                raise ValueError(f"prompt bundle field {name!r} is empty")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")


def game_bundle(nl_target: str) -> PromptBundle:
    """One-shot bundle with the Prisoner's Dilemma as the worked example."""
    return PromptBundle(
        prelude_source(),
        read_data("prompts", "pd_description.txt").strip(),
        canonical_game("PD").source.strip(),
        nl_target.strip(),
        "game",
    )


def strategy_bundle(nl_target: str, game_src: Optional[str] = None) -> PromptBundle:
    """One-shot bundle with tit-for-tat as the worked example.

    The rules of the game the strategy will play (PD by default) are shown
    alongside the shared clauses.
    """
    tft = strategy_source("tit_for_tat")
    game_src = game_src or canonical_game("PD").source
    gamma = prelude_source().rstrip() + "\n\n" + game_src.strip()
    code = tft.source.split("\n", 1)[1].strip()
    return PromptBundle(gamma, tft.nl_description, code, nl_target.strip(), "strategy")


@dataclass(frozen=True)
class LlmParams:
    model: str = "default"
    temperature: float = 1.0
    max_output_tokens: int = 2048
    max_attempts: int = 5
    sample: int = 0

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")

    def request(self, attempt: int) -> dict:
        """Per-request parameters; ``sample`` and ``attempt`` keep replay keys
        distinct across agents and retries."""
        return {
            "model": self.model,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "sample": self.sample,
            "attempt": attempt,
        }


def _template(name: str) -> Template:
    return Template(read_data("prompts", name))


def _system(kind: str) -> Message:
    return {"role": "system", "content": read_data("prompts", f"system_{kind}.txt").strip()}


def _fields(b: PromptBundle) -> dict:
    return {
        "gamma": b.gamma.strip(),
        "nl_example": b.nl_example,
        "code_example": b.code_example,
        "nl_target": b.nl_target,
        "kind": b.kind,
    }


def build_prompt(b: PromptBundle) -> List[Message]:
    user = _template("translate.txt").substitute(_fields(b)).strip()
    return [_system(b.kind), {"role": "user", "content": user}]


def build_game_prompt(b: PromptBundle) -> List[Message]:
    if b.kind != "game":
        raise ValueError("expected a game bundle")
    return build_prompt(b)


def build_strategy_prompt(b: PromptBundle) -> List[Message]:
    if b.kind != "strategy":
        raise ValueError("expected a strategy bundle")
    return build_prompt(b)


_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_CLAUSE_START = re.compile(r"^[a-z][A-Za-z0-9_]*\s*(\(|\.|if\b)")


def _code_like(line: str) -> bool:
    if not line.strip():
        return True
    if line.lstrip().startswith("%"):
        return True
    if line[0] in " \t":
        return True
    return bool(_CLAUSE_START.match(line))


def extract_code(response: str) -> str:
    """Pull LGDL source out of a chat response.

    Fenced blocks win when present; otherwise prose lines before the first
    and after the last clause-like line are dropped.
    """
    blocks = _FENCE.findall(response)
    if blocks:
        text = "\n".join(b.strip("\n") for b in blocks)
    else:
        text = response
    lines = text.strip().splitlines()
    while lines and not _code_like(lines[0]):
        lines.pop(0)
    while lines and not _code_like(lines[-1]):
        lines.pop()
    code = "\n".join(lines).strip()
    if not any(ln.strip() and not ln.lstrip().startswith("%") for ln in code.splitlines()):
        raise EmptyCode("no LGDL clauses found in the response")
    return code + "\n"


def _error_feedback(code: str, report: SyntaxReport) -> str:
    tail = code.rstrip().splitlines()[-3:]
    parts = []
    for err in report.errors:
        where = f"line {err.line}" if err.line is not None else "end of input"
        item = f"- {where}: {err.kind}: {err.message}"
        if err.line_text is not None:
            item += f"\n  offending line: {err.line_text}"
        elif err.line is None and tail:
            item += "\n  the code ends with:\n" + "\n".join(f"    {ln}" for ln in tail)
        for frame in err.trace:
            item += f"\n  in {frame}"
        parts.append(item)
    return "\n".join(parts)


def self_correct_prompt(code: str, report: SyntaxReport, bundle: PromptBundle) -> List[Message]:
    """A fresh conversation carrying the example, the rejected code and its errors."""
    if report.valid:
        raise ValueError("self-correction needs a failing syntax report")
    fields = _fields(bundle)
    fields["code"] = code.strip() or "(no code was found in the reply)"
    fields["errors"] = _error_feedback(code, report)
    user = _template("correct.txt").substitute(fields).strip()
    return [_system(bundle.kind), {"role": "user", "content": user}]


@dataclass
class Attempt:
    index: int
    digest: str
    response: str
    code: str
    report: SyntaxReport

    def to_dict(self) -> dict:
        return {
            "attempt": self.index,
            "digest": self.digest,
            "response": self.response,
            "code": self.code,
            "syntax": self.report.to_dict(),
        }


@dataclass
class AttemptLog:
    attempts: List[Attempt] = field(default_factory=list)
    status: str = "pending"
    code: Optional[str] = None
    message: Optional[str] = None
    params: Optional[LlmParams] = None

    @property
    def attempts_used(self) -> int:
        return len(self.attempts)

    @property
    def succeeded(self) -> bool:
        return self.status == "success"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "attempts_used": self.attempts_used,
            "message": self.message,
            "code": self.code,
            "params": asdict(self.params) if self.params else None,
            "attempts": [a.to_dict() for a in self.attempts],
        }


def _check(response: str):
    try:
        code = extract_code(response)
    except EmptyCode as exc:
        err = EngineError(PARSE_ERROR, str(exc))
        return "", SyntaxReport(False, [err], err.format())
    return code, check_syntax(code)


def autoformalize(bundle: PromptBundle, backend: ChatBackend, params: Optional[LlmParams] = None) -> AttemptLog:
    """Translate, check, and self-correct up to ``params.max_attempts`` times.

    A backend failure propagates with the partial log on ``exc.log``.
    """
    params = params or LlmParams()
    log = AttemptLog(params=params)
    code, report = "", None
    for n in range(1, params.max_attempts + 1):
        messages = build_prompt(bundle) if report is None else self_correct_prompt(code, report, bundle)
        request = params.request(n)
        digest = request_digest(messages, request)
        try:
            response = backend.complete(messages, request)
        except BackendError as exc:
            log.status = "backend_error"
            log.message = str(exc)
            exc.log = log
            raise
        code, report = _check(response)
        report.attempts_used = n
        log.attempts.append(Attempt(n, digest, response, code, report))
        if report.valid:
            log.status, log.code = "success", code
            return log
    log.status, log.message = "exhausted", EXHAUSTED_MESSAGE
    return log


__all__ = [
    "EXHAUSTED_MESSAGE",
    "Attempt",
    "AttemptLog",
    "EmptyCode",
    "LlmParams",
    "PromptBundle",
    "autoformalize",
    "build_game_prompt",
    "build_prompt",
    "build_strategy_prompt",
    "extract_code",
    "game_bundle",
    "request_digest",
    "self_correct_prompt",
    "strategy_bundle",
]

"""Chat backends: two HTTP wire formats, fixture replay and fixture recording."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence

log = logging.getLogger(__name__)

Message = Dict[str, str]

ENV_ENDPOINT = "GAMEFORM_LLM_ENDPOINT"
ENV_API_KEY = "GAMEFORM_LLM_API_KEY"
ENV_MODEL = "GAMEFORM_LLM_MODEL"

RETRY_STATUS = frozenset({408, 409, 425, 429, 500, 502, 503, 504})


class BackendError(RuntimeError):
    kind = "backend_error"

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.log = None


class FixtureMissing(BackendError):
    kind = "fixture_missing"


class ChatBackend(Protocol):
    def complete(self, messages: List[Message], params: dict) -> str: ...


def request_digest(messages: Sequence[Message], params: dict) -> str:
    """sha256 of the canonical JSON of the request."""
    payload = json.dumps({"messages": list(messages), "params": params}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class FixtureStore:
    """A directory of ``<digest>.json`` files holding request and response."""

    def __init__(self, root: os.PathLike | str) -> None:
        self.root = Path(root)

    def path(self, digest: str) -> Path:
        return self.root / f"{digest}.json"

    def get(self, messages: Sequence[Message], params: dict) -> Optional[str]:
        p = self.path(request_digest(messages, params))
        if not p.exists():
            return None
        return json.loads(p.read_text(encoding="utf-8"))["response"]

    def put(self, messages: Sequence[Message], params: dict, response: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        digest = request_digest(messages, params)
        record = {"digest": digest, "request": {"messages": list(messages), "params": params}, "response": response}
        p = self.path(digest)
        p.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return p


class ReplayBackend:
    """Serves recorded responses; never touches the network."""

    def __init__(self, store: FixtureStore | os.PathLike | str) -> None:
        self.store = store if isinstance(store, FixtureStore) else FixtureStore(store)
        self.calls = 0

    def complete(self, messages: List[Message], params: dict) -> str:
        self.calls += 1
        response = self.store.get(messages, params)
        if response is None:
            raise FixtureMissing(f"no fixture {request_digest(messages, params)}.json in {self.store.root}")
        return response


class ScriptedBackend:
    """Returns canned responses in order, whatever the request."""

    def __init__(self, responses: Sequence[str]) -> None:
        self.responses = list(responses)
        self.calls = 0

    def complete(self, messages: List[Message], params: dict) -> str:
        if self.calls >= len(self.responses):
            raise BackendError("scripted backend ran out of responses")
        self.calls += 1
        return self.responses[self.calls - 1]


class RecordingBackend:
    """Forwards to another backend and stores every exchange as a fixture."""

    def __init__(self, inner: ChatBackend, store: FixtureStore | os.PathLike | str) -> None:
        self.inner = inner
        self.store = store if isinstance(store, FixtureStore) else FixtureStore(store)

    def complete(self, messages: List[Message], params: dict) -> str:
        response = self.inner.complete(messages, params)
        self.store.put(messages, params, response)
        return response


class HttpChatBackend:
    """Chat-completions wire format: ``{"model", "messages"}`` in,
    ``choices[0].message.content`` out, bearer-token auth.

    Safe to share between threads; at most ``max_in_flight`` requests run at
    once and transient failures are retried with exponential backoff.
    """

    def __init__(
        self,
        endpoint: Optional[str] = None,
        api_key: Optional[str] = None,
        model: Optional[str] = None,
        *,
        timeout: float = 120.0,
        retries: int = 4,
        backoff: float = 1.0,
        max_in_flight: int = 4,
        client=None,
    ) -> None:
        import httpx

        self.endpoint = endpoint or os.environ.get(ENV_ENDPOINT)
        if not self.endpoint:
            raise BackendError(f"no endpoint configured; set {ENV_ENDPOINT}")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        self.model = model or os.environ.get(ENV_MODEL)
        self.retries = retries
        self.backoff = backoff
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._client = client or httpx.Client(timeout=timeout)

    def headers(self) -> dict:
        h = {"content-type": "application/json"}
        if self.api_key:
            h["authorization"] = f"Bearer {self.api_key}"
        return h

    def body(self, messages: List[Message], params: dict) -> dict:
        return {
            "model": self.model or params.get("model"),
            "messages": messages,
            "temperature": params.get("temperature", 1.0),
            "max_tokens": params.get("max_output_tokens", 2048),
        }

    def parse(self, data: dict) -> str:
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"unexpected response shape: {exc!r}") from exc

    def complete(self, messages: List[Message], params: dict) -> str:
        import httpx

        body = self.body(messages, params)
        with self._slots:
            for attempt in range(self.retries + 1):
                try:
                    resp = self._client.post(self.endpoint, json=body, headers=self.headers())
                except httpx.TransportError as exc:
                    error = f"transport error: {exc}"
                else:
                    if resp.status_code < 400:
                        return self.parse(resp.json())
                    error = f"HTTP {resp.status_code}: {resp.text[:200]}"
                    if resp.status_code not in RETRY_STATUS:
                        raise BackendError(error)
                if attempt < self.retries:
                    delay = self.backoff * 2**attempt
                    log.warning("%s; retrying in %.1fs", error, delay)
                    time.sleep(delay)
        raise BackendError(f"giving up after {self.retries + 1} tries: {error}")


class HttpMessagesBackend(HttpChatBackend):
    """Messages-API wire format: system prompt as a top-level field and the
    reply as a list of content blocks."""

    def body(self, messages: List[Message], params: dict) -> dict:
        system = "\n\n".join(m["content"] for m in messages if m["role"] == "system")
        body = super().body([m for m in messages if m["role"] != "system"], params)
        if system:
            body["system"] = system
        return body

    def parse(self, data: dict) -> str:
        try:
            return "".join(b.get("text", "") for b in data["content"] if b.get("type") == "text")
        except (KeyError, TypeError, AttributeError) as exc:
            raise BackendError(f"unexpected response shape: {exc!r}") from exc


def make_backend(kind: str, fixtures: Optional[os.PathLike | str] = None, **http_options) -> ChatBackend:
    """``replay``, ``http``, ``messages`` or ``record`` (http plus capture)."""
    if kind == "replay":
        if fixtures is None:
            raise BackendError("replay backend needs a fixture directory")
        return ReplayBackend(fixtures)
    if kind == "http":
        return HttpChatBackend(**http_options)
    if kind == "messages":
        return HttpMessagesBackend(**http_options)
    if kind == "record":
        if fixtures is None:
            raise BackendError("record backend needs a fixture directory")
        return RecordingBackend(HttpChatBackend(**http_options), fixtures)
    raise BackendError(f"unknown backend {kind!r}")

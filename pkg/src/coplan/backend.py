"""Chat-completion backends: live HTTP, scripted replay, and recording.

The engine only ever sees the :class:`Backend` protocol — one ``complete``
call per model round-trip. Tests and the replay CLI run entirely on
:class:`ScriptedBackend` (a fixture table keyed by session/role/call index),
which makes every pipeline run deterministic and network-free.
:class:`RecordingBackend` wraps any backend and captures its traffic as a
fixture file, so a live session can be replayed later bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Protocol

from .errors import BackendError, DigestMismatch, FixtureMiss, StorageError

_WS_RUN = re.compile(r"\s+")


@dataclass(frozen=True)
class ToolCall:
    """One function invocation requested by the model."""

    name: str
    args: dict[str, Any]
    call_id: str = ""

    def to_json(self) -> dict:
        return {"id": self.call_id, "name": self.name, "args": self.args}

    @classmethod
    def from_json(cls, data: dict) -> "ToolCall":
        return cls(name=data["name"], args=data.get("args") or {}, call_id=data.get("id", ""))


@dataclass
class ChatRequest:
    messages: list[dict]
    tool_schemas: list[dict] = field(default_factory=list)
    temperature: float = 0.0
    model: str = ""
    max_tokens: int = 4096
    # fixture addressing: which session, which role, which call within that role
    session: str = ""
    role: str = ""
    call: int = 0

    def key(self) -> tuple[str, str, int]:
        return (self.session, self.role, self.call)


@dataclass
class ChatResponse:
    """Either assistant text or tool calls, never both."""

    text: str | None = None
    tool_calls: list[ToolCall] | None = None
    usage: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if (self.text is None) == (self.tool_calls is None):
            raise ValueError("exactly one of text/tool_calls must be set")

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "tool_calls": [c.to_json() for c in self.tool_calls] if self.tool_calls else None,
            "usage": self.usage,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ChatResponse":
        calls = data.get("tool_calls")
        return cls(
            text=data.get("text"),
            tool_calls=[ToolCall.from_json(c) for c in calls] if calls else None,
            usage=data.get("usage") or {},
        )


class Backend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


def request_digest(request: ChatRequest) -> str:
    """Stable hash of the request's message content.

    Volatile fields (tool-call ids, usage, addressing metadata) are excluded
    and whitespace runs are collapsed, so cosmetic prompt edits do not
    invalidate recorded fixtures while real context drift does.
    """
    parts: list[str] = []
    for message in request.messages:
        content = _WS_RUN.sub(" ", str(message.get("content") or "")).strip()
        parts.append(f"{message.get('role', '')}\x00{content}")
        for call in message.get("tool_calls") or []:
            fn = call.get("function", call)
            parts.append(f"call\x00{fn.get('name', '')}\x00{fn.get('arguments', '')}")
    blob = "\x01".join(parts).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class Fixture:
    session: str
    role: str
    call: int
    request_digest: str
    response: ChatResponse

    def key(self) -> tuple[str, str, int]:
        return (self.session, self.role, self.call)

    def to_json(self) -> dict:
        return {
            "key": {"session": self.session, "role": self.role, "call": self.call},
            "request_digest": self.request_digest,
            "response": self.response.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Fixture":
        key = data["key"]
        return cls(
            session=key["session"],
            role=key["role"],
            call=int(key["call"]),
            request_digest=data.get("request_digest", ""),
            response=ChatResponse.from_json(data["response"]),
        )


def load_fixtures(path: str | Path) -> list[Fixture]:
    path = Path(path)
    if not path.exists():
        raise StorageError(f"fixture file not found: {path}")
    fixtures = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            fixtures.append(Fixture.from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as exc:
            raise StorageError(f"{path}:{line_no}: bad fixture record: {exc}") from exc
    return fixtures


def save_fixtures(fixtures: Iterable[Fixture], path: str | Path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for fixture in fixtures:
                fh.write(json.dumps(fixture.to_json(), ensure_ascii=False) + "\n")
    except OSError as exc:
        raise StorageError(f"cannot write fixtures to {path}: {exc}") from exc


class ScriptedBackend:
    """Replays recorded responses; zero network, deterministic by key.

    In strict mode the stored request digest must match the incoming request,
    which catches silent context drift between recording and replay.
    """

    def __init__(self, fixtures: Iterable[Fixture], strict: bool = False):
        self._table: dict[tuple[str, str, int], Fixture] = {}
        for fixture in fixtures:
            if fixture.key() in self._table:
                raise StorageError(f"duplicate fixture key: {fixture.key()}")
            self._table[fixture.key()] = fixture
        self.strict = strict
        self.calls = 0

    @classmethod
    def from_file(cls, path: str | Path, strict: bool = False) -> "ScriptedBackend":
        return cls(load_fixtures(path), strict=strict)

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.calls += 1
        fixture = self._table.get(request.key())
        if fixture is None:
            raise FixtureMiss(
                f"no fixture for key {request.key()}",
                key=list(request.key()),
                nearest=[list(k) for k in self._nearest(request.key())],
            )
        if self.strict and fixture.request_digest:
            actual = request_digest(request)
            if actual != fixture.request_digest:
                raise DigestMismatch(
                    f"request digest drifted for key {request.key()}",
                    expected=fixture.request_digest,
                    actual=actual,
                )
        return fixture.response

    def _nearest(self, key: tuple[str, str, int], limit: int = 3) -> list[tuple[str, str, int]]:
        def distance(candidate: tuple[str, str, int]) -> tuple[int, int, int]:
            return (
                0 if candidate[0] == key[0] else 1,
                0 if candidate[1] == key[1] else 1,
                abs(candidate[2] - key[2]),
            )

        return sorted(self._table, key=distance)[:limit]


class RecordingBackend:
    """Transparent pass-through that captures every exchange as a fixture."""

    def __init__(self, inner: Backend, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self.fixtures: list[Fixture] = []
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.complete(request)
        fixture = Fixture(
            session=request.session,
            role=request.role,
            call=request.call,
            request_digest=request_digest(request),
            response=response,
        )
        with self._lock:
            self.fixtures.append(fixture)
        return response

    def flush(self) -> None:
        with self._lock:
            save_fixtures(self.fixtures, self.path)

    def close(self) -> None:
        self.flush()

    def __enter__(self) -> "RecordingBackend":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


@dataclass
class BackendConfig:
    """Connection settings for the live OpenAI-compatible client."""

    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o"
    credential_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    temperature: float = 0.0
    max_tokens: int = 4096
    max_in_flight: int = 4


_RETRIABLE_STATUS = {429, 500, 502, 503, 504}


class HttpBackend:
    """Live client speaking the chat-completions wire format with tool calls."""

    def __init__(self, config: BackendConfig):
        self.config = config
        self._slots = threading.BoundedSemaphore(config.max_in_flight)

    def _credential(self) -> str:
        # The credential is read here and nowhere else in the engine.
        value = os.environ.get(self.config.credential_env, "")
        if not value:
            raise BackendError(
                f"credential environment variable {self.config.credential_env} is not set"
            )
        return value

    def complete(self, request: ChatRequest) -> ChatResponse:
        body = {
            "model": request.model or self.config.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens or self.config.max_tokens,
        }
        if request.tool_schemas:
            body["tools"] = [
                {"type": "function", "function": schema} for schema in request.tool_schemas
            ]
        payload = json.dumps(body).encode("utf-8")
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {
            "Content-Type": "application/json",
            "Authorization": f"Bearer {self._credential()}",
        }
        last_error: Exception | None = None
        with self._slots:
            for attempt in range(self.config.max_retries + 1):
                if attempt:
                    time.sleep(min(2.0 ** attempt * 0.25, 4.0))
                try:
                    http_request = urllib.request.Request(
                        url, data=payload, headers=headers, method="POST"
                    )
                    with urllib.request.urlopen(
                        http_request, timeout=self.config.timeout
                    ) as raw:
                        return _parse_completion(json.load(raw))
                except urllib.error.HTTPError as exc:
                    last_error = exc
                    if exc.code not in _RETRIABLE_STATUS:
                        raise BackendError(
                            f"chat completion failed with HTTP {exc.code}",
                            status=exc.code,
                        ) from exc
                except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
                    last_error = exc
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    raise BackendError(f"malformed completion response: {exc}") from exc
        raise BackendError(
            f"chat completion failed after {self.config.max_retries + 1} attempts: {last_error}"
        )


def _parse_completion(payload: dict) -> ChatResponse:
    choice = payload["choices"][0]
    message = choice["message"]
    usage = payload.get("usage") or {}
    raw_calls = message.get("tool_calls")
    if raw_calls:
        calls = []
        for raw in raw_calls:
            fn = raw.get("function") or {}
            try:
                args = json.loads(fn.get("arguments") or "{}")
            except json.JSONDecodeError:
                args = {}
            calls.append(ToolCall(name=fn.get("name", ""), args=args, call_id=raw.get("id", "")))
        return ChatResponse(tool_calls=calls, usage=usage)
    return ChatResponse(text=message.get("content") or "", usage=usage)

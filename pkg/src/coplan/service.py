"""Network-facing session manager: HTTP API plus server-sent event stream.

The service owns session lifecycles, persistence, and event fan-out. All
requests for one session funnel through that session's lock, so the engine
sees a single ordered stream of operations per conversation; sessions are
independent and fully parallel across each other.

Endpoints (JSON bodies, problem-detail errors):

    POST   /sessions                       {query, mode}   -> session handle
    POST   /sessions/{id}/messages         {text}          -> {accepted, seq}
    GET    /sessions/{id}/panels                           -> panel snapshot
    POST   /sessions/{id}/needs            {text}          -> {revision}
    PATCH  /sessions/{id}/needs/{need_id}  {text}          -> {revision}
    DELETE /sessions/{id}/needs/{need_id}                  -> {revision}
    GET    /sessions/{id}/events?since=N   (text/event-stream)
"""

from __future__ import annotations

import itertools
import json
import queue
import re
import threading
import time
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Callable, Iterator

from .agents import PromptPack
from .backend import Backend
from .errors import BindError, CoplanError, EmptyQuery, UnknownSession
from .memo import AddManual, Delete, Update, UserEdit
from .orchestrator import Session, build_panels, replay_records
from .storage import SessionLog, canonical_json


class SessionService:
    """Session lifecycle, persistence, and event fan-out behind the HTTP API."""

    def __init__(
        self,
        backend: Backend,
        storage_dir: str | Path,
        *,
        prompt_pack: PromptPack | None = None,
        model: str = "",
        temperature: float = 0.0,
        session_tag: str | None = None,
        id_factory: Callable[[], str] | None = None,
        clock: Callable[[], float] = time.time,
        heartbeat_seconds: float = 15.0,
    ):
        self.backend = backend
        self.prompt_pack = prompt_pack or PromptPack.default()
        self.model = model
        self.temperature = temperature
        self.session_tag = session_tag
        self.heartbeat_seconds = heartbeat_seconds
        self._clock = clock
        self._id_factory = id_factory or (lambda: uuid.uuid4().hex[:12])
        self._log = SessionLog(storage_dir)
        self._sessions: dict[str, Session] = {}
        self._subscribers: dict[str, list[queue.Queue]] = {}
        self._lock = threading.Lock()
        self._closed = False

    # -- lifecycle -----------------------------------------------------------

    def create_session(self, query: str, mode: str = "care") -> dict:
        if mode not in ("care", "baseline"):
            raise EmptyQuery(f"mode must be 'care' or 'baseline', got {mode!r}")
        if not (query or "").strip():
            raise EmptyQuery("query must not be empty")
        session_id = self._id_factory()
        session = Session(
            session_id,
            self.backend,
            self.prompt_pack,
            baseline_mode=(mode == "baseline"),
            tag=self.session_tag or session_id,
            sink=self._sink,
            model=self.model,
            temperature=self.temperature,
            clock=self._clock,
        )
        with self._lock:
            self._sessions[session_id] = session
        with session.lock:
            session.start(query)
            self._maybe_snapshot(session)
        return {
            "session_id": session_id,
            "mode": mode,
            "created_at": session.state.created_at,
        }

    def _sink(self, session_id: str, record: dict) -> None:
        self._log.append(session_id, record)
        if record.get("t") == "event":
            event = {k: v for k, v in record.items() if k != "t"}
            with self._lock:
                targets = list(self._subscribers.get(session_id, []))
            for q in targets:
                q.put(event)

    def _get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is not None:
                return session
        # lazy crash recovery: fold the persisted log back into a session
        if not self._log.exists(session_id):
            raise UnknownSession(f"no session {session_id}", session_id=session_id)
        state = replay_records(self._log.read(session_id))
        session = Session.resume(
            state,
            self.backend,
            self.prompt_pack,
            sink=self._sink,
            model=self.model,
            temperature=self.temperature,
        )
        with self._lock:
            return self._sessions.setdefault(session_id, session)

    # -- operations -----------------------------------------------------------

    def post_message(self, session_id: str, text: str) -> dict:
        session = self._get(session_id)
        with session.lock:
            session.handle_user_message(text)
            seq = session.state.message_seq
            self._maybe_snapshot(session)
        return {"accepted": True, "seq": seq}

    def get_panels(self, session_id: str) -> dict:
        session = self._get(session_id)
        with session.lock:
            return build_panels(session.state)

    def edit_need(self, session_id: str, edit: UserEdit) -> dict:
        session = self._get(session_id)
        with session.lock:
            session.apply_manual_edit(edit)
            revision = session.state.memo.revision
            self._maybe_snapshot(session)
        return {"revision": revision}

    def events_snapshot(self, session_id: str, since: int = 0) -> list[dict]:
        session = self._get(session_id)
        with session.lock:
            return [e.to_json() for e in session.state.events if e.seq > since]

    def subscribe(self, session_id: str, since: int = 0) -> Iterator[dict | None]:
        """Replay stored events after ``since``, then live-tail.

        Yields event dicts; yields None on heartbeat intervals so the HTTP
        layer can emit keep-alive comments. Delivery is at-least-once — the
        seq field dedups on the client side.
        """
        session = self._get(session_id)
        q: queue.Queue = queue.Queue()
        with self._lock:
            self._subscribers.setdefault(session_id, []).append(q)
        last = since
        try:
            with session.lock:
                backlog = [e.to_json() for e in session.state.events if e.seq > since]
            for event in backlog:
                last = event["seq"]
                yield event
            while not self._closed:
                try:
                    event = q.get(timeout=self.heartbeat_seconds)
                except queue.Empty:
                    yield None
                    continue
                if event["seq"] <= last:
                    continue
                last = event["seq"]
                yield event
        finally:
            with self._lock:
                subscribers = self._subscribers.get(session_id, [])
                if q in subscribers:
                    subscribers.remove(q)

    def list_sessions(self) -> list[str]:
        with self._lock:
            live = set(self._sessions)
        return sorted(live | set(self._log.list_sessions()))

    def _maybe_snapshot(self, session: Session) -> None:
        count = self._log.record_count(session.state.id)
        if count and count % self._log.snapshot_every == 0:
            self._log.write_snapshot(
                session.state.id,
                {"at": count, "panels": build_panels(session.state)},
            )

    def close(self) -> None:
        self._closed = True
        with self._lock:
            for subscribers in self._subscribers.values():
                for q in subscribers:
                    q.put({"seq": -1, "kind": "_closed"})
        self._log.close()


# --- HTTP layer -----------------------------------------------------------------

_SESSION_ROUTE = re.compile(r"^/sessions/([A-Za-z0-9_-]+)(/.*)?$")


def _problem(error: CoplanError) -> tuple[int, dict]:
    return error.http_status, error.to_problem()


class ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    service: SessionService  # set by build_server

    # -- helpers -----------------------------------------------------------

    def _json_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if not length:
            return {}
        try:
            return json.loads(self.rfile.read(length))
        except json.JSONDecodeError:
            return {}

    def _send_json(self, status: int, payload: dict) -> None:
        data = canonical_json(payload).encode("utf-8")
        self.send_response(status)
        content_type = (
            "application/problem+json" if status >= 400 else "application/json"
        )
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def _send_error(self, error: CoplanError) -> None:
        status, problem = _problem(error)
        self._send_json(status, problem)

    def _dispatch(self, method: str) -> None:
        try:
            self._route(method)
        except CoplanError as error:
            try:
                self._send_error(error)
            except (BrokenPipeError, ConnectionResetError):
                pass
        except (BrokenPipeError, ConnectionResetError):
            pass
        except Exception as error:  # defensive: never leak a stack trace
            try:
                self._send_json(
                    500,
                    {"title": "InternalError", "status": 500, "code": "InternalError",
                     "detail": str(error)},
                )
            except (BrokenPipeError, ConnectionResetError):
                pass

    # -- routing -----------------------------------------------------------

    def _route(self, method: str) -> None:
        path = self.path.split("?", 1)[0].rstrip("/") or "/"
        if method == "POST" and path == "/sessions":
            body = self._json_body()
            handle = self.service.create_session(
                body.get("query", ""), body.get("mode", "care")
            )
            self._send_json(201, handle)
            return
        match = _SESSION_ROUTE.match(path)
        if not match:
            self._send_json(
                404,
                {"title": "NotFound", "status": 404, "code": "NotFound",
                 "detail": f"no route {method} {path}"},
            )
            return
        session_id, rest = match.group(1), match.group(2) or ""
        if method == "POST" and rest == "/messages":
            body = self._json_body()
            self._send_json(202, self.service.post_message(session_id, body.get("text", "")))
        elif method == "GET" and rest == "/panels":
            self._send_json(200, self.service.get_panels(session_id))
        elif method == "GET" and rest == "/events":
            self._stream_events(session_id)
        elif method == "POST" and rest == "/needs":
            body = self._json_body()
            self._send_json(
                200, self.service.edit_need(session_id, AddManual(body.get("text", "")))
            )
        elif rest.startswith("/needs/") and method in ("PATCH", "DELETE"):
            need_id = rest.removeprefix("/needs/")
            if method == "PATCH":
                body = self._json_body()
                edit: UserEdit = Update(need_id, body.get("text", ""))
            else:
                edit = Delete(need_id)
            self._send_json(200, self.service.edit_need(session_id, edit))
        else:
            self._send_json(
                404,
                {"title": "NotFound", "status": 404, "code": "NotFound",
                 "detail": f"no route {method} {path}"},
            )

    def _stream_events(self, session_id: str) -> None:
        query = self.path.split("?", 1)
        since = 0
        if len(query) == 2:
            for pair in query[1].split("&"):
                if pair.startswith("since="):
                    try:
                        since = int(pair.split("=", 1)[1])
                    except ValueError:
                        since = 0
        stream = self.service.subscribe(session_id, since)
        # pull the first item before sending headers so UnknownSession still
        # surfaces as a problem response rather than a broken stream
        try:
            head: list[dict | None] = [next(stream)]
        except StopIteration:
            head = []
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        try:
            for event in itertools.chain(head, stream):
                if event is None:
                    self.wfile.write(b": ping\n\n")
                    self.wfile.flush()
                    continue
                if event.get("kind") == "_closed":
                    break
                self._write_event(event)
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            stream.close()

    def _write_event(self, event: dict) -> None:
        payload = canonical_json(event)
        frame = f"id: {event['seq']}\nevent: {event['kind']}\ndata: {payload}\n\n"
        self.wfile.write(frame.encode("utf-8"))
        self.wfile.flush()

    # -- verb handlers -----------------------------------------------------------

    def do_GET(self) -> None:
        self._dispatch("GET")

    def do_POST(self) -> None:
        self._dispatch("POST")

    def do_PATCH(self) -> None:
        self._dispatch("PATCH")

    def do_DELETE(self) -> None:
        self._dispatch("DELETE")

    def log_message(self, *args: Any) -> None:
        pass  # quiet by default; operators watch the event log instead


def build_server(service: SessionService, host: str, port: int) -> ThreadingHTTPServer:
    handler = type("BoundApiHandler", (ApiHandler,), {"service": service})
    try:
        server = ThreadingHTTPServer((host, port), handler)
    except OSError as exc:
        raise BindError(f"cannot bind {host}:{port}: {exc}") from exc
    server.daemon_threads = True
    return server

"""Operator entry points: serve the API, chat in a terminal, replay fixtures,
and export persisted sessions.

Configuration precedence is flags > environment > config file > defaults.
Exit codes: 0 ok, 1 expectation mismatch, 2 config error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
import threading
import uuid
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .agents import PromptPack
from .backend import (
    Backend,
    BackendConfig,
    HttpBackend,
    RecordingBackend,
    ScriptedBackend,
)
from .errors import (
    BackendError,
    BindError,
    ConfigError,
    CoplanError,
    ExpectationMismatch,
)
from .memo import AddManual, Delete, Update, WantStatus
from .orchestrator import Phase, Session, UiEvent, build_panels, replay_records
from .service import SessionService, build_server
from .storage import SessionLog, canonical_json

ENV_PREFIX = "COPLAN_"

DEFAULTS = {
    "backend_mode": "live",
    "base_url": "https://api.openai.com/v1",
    "model": "gpt-4o",
    "credential_env": "OPENAI_API_KEY",
    "timeout": 60.0,
    "max_retries": 3,
    "temperature": 0.0,
    "fixtures": "",
    "strict_fixtures": False,
    "record_to": "",
    "prompt_pack": "",
    "storage": "./coplan-sessions",
    "listen": "127.0.0.1:8787",
    "session_tag": "",
}

_FILE_SECTIONS = {
    "backend": ("backend_mode", "base_url", "model", "credential_env", "timeout",
                "max_retries", "temperature"),
    "paths": ("fixtures", "prompt_pack", "storage", "record_to"),
    "serve": ("listen",),
    "session": ("session_tag", "strict_fixtures"),
}


@dataclass
class CliConfig:
    backend_mode: str = "live"
    base_url: str = DEFAULTS["base_url"]
    model: str = DEFAULTS["model"]
    credential_env: str = DEFAULTS["credential_env"]
    timeout: float = 60.0
    max_retries: int = 3
    temperature: float = 0.0
    fixtures: str = ""
    strict_fixtures: bool = False
    record_to: str = ""
    prompt_pack: str = ""
    storage: str = DEFAULTS["storage"]
    listen: str = DEFAULTS["listen"]
    session_tag: str = ""
    sources: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.backend_mode not in ("live", "scripted"):
            raise ConfigError(f"backend mode must be live or scripted, got {self.backend_mode!r}")
        if self.backend_mode == "scripted" and not self.fixtures:
            raise ConfigError("scripted backend requires a fixture path (--fixtures)")
        if self.backend_mode == "live" and not os.environ.get(self.credential_env):
            raise ConfigError(
                f"live backend requires the credential environment variable "
                f"{self.credential_env} to be set"
            )

    def build_backend(self) -> Backend:
        if self.backend_mode == "scripted":
            backend: Backend = ScriptedBackend.from_file(
                resolve_fixture_path(self.fixtures), strict=self.strict_fixtures
            )
        else:
            backend = HttpBackend(
                BackendConfig(
                    base_url=self.base_url,
                    model=self.model,
                    credential_env=self.credential_env,
                    timeout=self.timeout,
                    max_retries=self.max_retries,
                    temperature=self.temperature,
                )
            )
        if self.record_to:
            backend = RecordingBackend(backend, self.record_to)
        return backend

    def build_prompt_pack(self) -> PromptPack:
        if self.prompt_pack:
            return PromptPack.load(self.prompt_pack)
        return PromptPack.default()


def resolve_fixture_path(name: str) -> Path:
    """A literal path, or the name of a fixture set shipped with the package."""
    path = Path(name)
    if path.exists():
        return path
    builtin = resources.files("coplan").joinpath(f"fixtures/{name}.jsonl")
    if builtin.is_file():
        return Path(str(builtin))
    raise ConfigError(f"fixture set not found: {name}")


def resolve_expectation_path(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    builtin = resources.files("coplan").joinpath(f"fixtures/{name}.expect.json")
    if builtin.is_file():
        return Path(str(builtin))
    raise ConfigError(f"expectation file not found: {name}")


def _coerce(key: str, value):
    target = DEFAULTS[key]
    if isinstance(target, bool):
        if isinstance(value, bool):
            return value
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    if isinstance(target, float):
        return float(value)
    if isinstance(target, int):
        return int(value)
    return str(value)


def load_config(args: argparse.Namespace) -> CliConfig:
    """Merge defaults, config file, environment, and flags, in that order."""
    values = dict(DEFAULTS)
    sources = {key: "default" for key in values}

    config_path = args.config or os.environ.get(f"{ENV_PREFIX}CONFIG") or ""
    if not config_path and Path("coplan.toml").exists():
        config_path = "coplan.toml"
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
        for section, keys in _FILE_SECTIONS.items():
            table = data.get(section, {})
            if not isinstance(table, dict):
                raise ConfigError(f"config section [{section}] must be a table")
            for file_key, value in table.items():
                key = file_key if file_key in keys else None
                if key is None:
                    raise ConfigError(f"unknown config key [{section}].{file_key}")
                values[key] = _coerce(key, value)
                sources[key] = f"file:{path}"

    for key in DEFAULTS:
        env_name = ENV_PREFIX + key.upper()
        if env_name in os.environ:
            values[key] = _coerce(key, os.environ[env_name])
            sources[key] = f"env:{env_name}"

    for key in DEFAULTS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            values[key] = _coerce(key, flag_value)
            sources[key] = "flag"

    return CliConfig(**values, sources=sources)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coplan",
        description="Collaborative needs-elicitation and solution-drafting engine.",
    )
    parser.add_argument("--config", help="path to a TOML config file")
    parser.add_argument("--backend-mode", dest="backend_mode", choices=("live", "scripted"))
    parser.add_argument("--base-url", dest="base_url")
    parser.add_argument("--model", dest="model")
    parser.add_argument("--credential-env", dest="credential_env")
    parser.add_argument("--timeout", dest="timeout", type=float)
    parser.add_argument("--max-retries", dest="max_retries", type=int)
    parser.add_argument("--temperature", dest="temperature", type=float)
    parser.add_argument("--fixtures", dest="fixtures", help="fixture file or builtin set name")
    parser.add_argument(
        "--strict-fixtures", dest="strict_fixtures", action="store_const", const=True,
        help="verify request digests during scripted replay",
    )
    parser.add_argument("--record-to", dest="record_to", help="record backend traffic to this fixture file")
    parser.add_argument("--prompt-pack", dest="prompt_pack", help="directory of role prompt files")
    parser.add_argument("--storage", dest="storage", help="session log directory")
    parser.add_argument("--listen", dest="listen", help="host:port for serve")
    parser.add_argument("--session-tag", dest="session_tag", help="fixture session tag")

    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("serve", help="run the HTTP session service")

    chat = commands.add_parser("chat", help="interactive terminal session")
    chat.add_argument("query", help="the initial query")
    chat.add_argument("--mode", choices=("care", "baseline"), default="care")

    replay = commands.add_parser("replay", help="replay fixtures against expectations")
    replay.add_argument("--fixture-set", required=True, help="fixture file or builtin name")
    replay.add_argument("--expect", required=True, help="expectation file or builtin name")

    export = commands.add_parser("export", help="dump a persisted session")
    export.add_argument("--session", required=True)
    export.add_argument("--out", help="write to file instead of stdout")

    return parser


# --- serve -----------------------------------------------------------------


def cmd_serve(config: CliConfig, out=None) -> int:
    out = out or sys.stdout
    config.validate()
    host, _, port_text = config.listen.partition(":")
    try:
        port = int(port_text or "8787")
    except ValueError as exc:
        raise ConfigError(f"invalid listen address {config.listen!r}") from exc
    service = SessionService(
        config.build_backend(),
        config.storage,
        prompt_pack=config.build_prompt_pack(),
        model=config.model if config.backend_mode == "live" else "",
        temperature=config.temperature,
        session_tag=config.session_tag or None,
    )
    server = build_server(service, host or "127.0.0.1", port)
    stop = threading.Event()

    def shutdown(signum, frame):
        stop.set()

    signal.signal(signal.SIGINT, shutdown)
    signal.signal(signal.SIGTERM, shutdown)
    print(
        f"coplan service listening on http://{server.server_address[0]}:{server.server_address[1]}",
        file=out,
        flush=True,
    )
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        stop.wait()
    finally:
        server.shutdown()
        service.close()
        print("coplan service stopped; session logs flushed", file=out)
    return 0


# --- chat -----------------------------------------------------------------

_SKIP_MESSAGE = "Please stop asking questions and show me the solution now."

_STATUS_MARK = {
    WantStatus.WANTED: "wanted",
    WantStatus.DECLINED: "declined",
    WantStatus.UNANSWERED: "pending",
}


def _render_events(events: list[UiEvent], out) -> None:
    for event in events:
        kind = event.kind
        if kind == "agent_message":
            print(f"[{event.payload['source']}] {event.payload['text']}", file=out)
        elif kind == "questions_posted":
            print(f"-- {event.payload['topic']} --", file=out)
            for i, question in enumerate(event.payload["questions"], 1):
                print(f"  {i}. {question['question']}", file=out)
        elif kind == "solution_updated":
            print("(solution updated — type /solution to view)", file=out)
        elif kind == "solution_ready_notice":
            print("* The solution is ready. Type /solution to view it. *", file=out)
        elif kind == "grounding_failure":
            dangling = ", ".join(event.payload["dangling"])
            print(f"! warning: solution cites unknown needs: {dangling}", file=out)


def _render_needs(session: Session, out) -> None:
    memo = session.state.memo
    if not len(memo):
        print("(no needs recorded yet)", file=out)
        return
    print(f"needs memo (revision {memo.revision}):", file=out)
    for slot in memo:
        marker = "?" if slot.clarify else " "
        print(f"  {slot.id} [{_STATUS_MARK[slot.want]}]{marker} {slot.need}", file=out)


def _render_solution(session: Session, out) -> None:
    solution = session.state.solution
    if solution is None:
        print("(no solution yet)", file=out)
        return
    print(solution.body, file=out)
    if solution.refs:
        cited = sorted({r.id for r in solution.refs}, key=int)
        print(f"\n[cites needs: {', '.join(cited)}]", file=out)


def _handle_edit_command(session: Session, rest: str, out) -> None:
    parts = rest.split(None, 1)
    if not parts:
        print("usage: /edit add <text> | update <id> <text> | del <id>", file=out)
        return
    action = parts[0]
    try:
        if action == "add" and len(parts) == 2:
            events = session.apply_manual_edit(AddManual(parts[1]))
        elif action == "update" and len(parts) == 2:
            ident, _, text = parts[1].partition(" ")
            events = session.apply_manual_edit(Update(ident, text))
        elif action in ("del", "delete") and len(parts) == 2:
            events = session.apply_manual_edit(Delete(parts[1].strip()))
        else:
            print("usage: /edit add <text> | update <id> <text> | del <id>", file=out)
            return
    except CoplanError as error:
        print(f"edit rejected: {error.code}: {error.message}", file=out)
        return
    _render_events(events, out)


def cmd_chat(config: CliConfig, query: str, mode: str, stdin=None, out=None) -> int:
    stdin = stdin or sys.stdin
    out = out or sys.stdout
    config.validate()
    backend = config.build_backend()
    session = Session(
        f"chat-{uuid.uuid4().hex[:8]}",
        backend,
        config.build_prompt_pack(),
        baseline_mode=(mode == "baseline"),
        tag=config.session_tag or "chat",
        model=config.model if config.backend_mode == "live" else "",
        temperature=config.temperature,
    )
    _render_events(session.start(query), out)
    while True:
        if session.state.phase in (Phase.INQUIRING,):
            print("(answer the questions, or /skip /needs /solution /edit /quit)", file=out)
        print("> ", end="", file=out, flush=True)
        line = stdin.readline()
        if not line:
            break
        line = line.strip()
        if not line:
            continue
        if line == "/quit":
            break
        if line == "/needs":
            _render_needs(session, out)
            continue
        if line == "/solution":
            _render_solution(session, out)
            continue
        if line.startswith("/edit"):
            _handle_edit_command(session, line[len("/edit"):].strip(), out)
            continue
        message = _SKIP_MESSAGE if line == "/skip" else line
        try:
            _render_events(session.handle_user_message(message), out)
        except CoplanError as error:
            print(f"rejected: {error.code}: {error.message}", file=out)
    if isinstance(backend, RecordingBackend):
        backend.close()
    return 0


# --- replay -----------------------------------------------------------------


def run_replay(fixture_set: str, expectation_file: str, strict: bool = False) -> dict:
    """Run a session headlessly and diff its trace against the expectation."""
    expectation = json.loads(resolve_expectation_path(expectation_file).read_text(encoding="utf-8"))
    backend = ScriptedBackend.from_file(resolve_fixture_path(fixture_set), strict=strict)
    tag = expectation.get("session_tag", expectation.get("name", "replay"))
    session = Session(tag, backend, baseline_mode=(expectation.get("mode") == "baseline"), tag=tag)
    session.start(expectation["query"])
    for step in expectation.get("inputs", []):
        if step["kind"] == "message":
            session.handle_user_message(step["text"])
        elif step["kind"] == "edit":
            op = step["op"]
            if op == "add":
                session.apply_manual_edit(AddManual(step["text"]))
            elif op == "update":
                session.apply_manual_edit(Update(step["id"], step["text"]))
            elif op == "delete":
                session.apply_manual_edit(Delete(step["id"]))
            else:
                raise ConfigError(f"unknown edit op in expectation: {op}")
        else:
            raise ConfigError(f"unknown input kind in expectation: {step['kind']}")

    actual_events = [event.to_json() for event in session.state.events]
    actual_panels = build_panels(session.state)
    expected_events = expectation["expected"]["events"]
    expected_panels = expectation["expected"]["panels"]

    event_diff = None
    for index, (got, want) in enumerate(zip(actual_events, expected_events)):
        if got != want:
            event_diff = {"index": index, "expected": want, "actual": got}
            break
    if event_diff is None and len(actual_events) != len(expected_events):
        event_diff = {
            "index": min(len(actual_events), len(expected_events)),
            "expected_count": len(expected_events),
            "actual_count": len(actual_events),
        }
    panels_match = canonical_json(actual_panels) == canonical_json(expected_panels)
    return {
        "ok": event_diff is None and panels_match,
        "events_checked": len(expected_events),
        "event_diff": event_diff,
        "panels_match": panels_match,
    }


def cmd_replay(config: CliConfig, fixture_set: str, expectation_file: str, out=None) -> int:
    out = out or sys.stdout
    report = run_replay(fixture_set, expectation_file, strict=config.strict_fixtures)
    if report["ok"]:
        print(
            f"replay ok: {report['events_checked']} events matched, panels identical",
            file=out,
        )
        return 0
    if report["event_diff"] is not None:
        print(f"replay FAILED: first divergent event: {json.dumps(report['event_diff'], ensure_ascii=False)}", file=out)
    if not report["panels_match"]:
        print("replay FAILED: final panel snapshot differs", file=out)
    raise ExpectationMismatch("replay diverged from expectation", report=report)


# --- export -----------------------------------------------------------------


def cmd_export(config: CliConfig, session_id: str, out_path: str | None, out=None) -> int:
    out = out or sys.stdout
    log = SessionLog(config.storage)
    records = log.read(session_id)
    if not records:
        raise ConfigError(f"no persisted session {session_id!r} under {config.storage}")
    state = replay_records(records)
    payload = {
        "session_id": session_id,
        "phase": state.phase.value,
        "panels": build_panels(state),
        "events": [event.to_json() for event in state.events],
        "milestones": [m.to_json() for m in state.milestones],
    }
    text = json.dumps(payload, ensure_ascii=False, indent=2)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
        print(f"exported session {session_id} to {out_path}", file=out)
    else:
        print(text, file=out)
    return 0


# --- entry point -----------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args)
        if args.command == "serve":
            return cmd_serve(config)
        if args.command == "chat":
            return cmd_chat(config, args.query, args.mode)
        if args.command == "replay":
            return cmd_replay(config, args.fixture_set, args.expect)
        if args.command == "export":
            return cmd_export(config, args.session, args.out)
        parser.error(f"unknown command {args.command}")
        return 2
    except ExpectationMismatch as error:
        print(f"error: {error.code}: {error.message}", file=sys.stderr)
        return 1
    except (ConfigError, BindError) as error:
        print(f"error: {error.code}: {error.message}", file=sys.stderr)
        return 2
    except BackendError as error:
        print(f"error: {error.code}: {error.message}", file=sys.stderr)
        return 3
    except CoplanError as error:
        print(f"error: {error.code}: {error.message}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

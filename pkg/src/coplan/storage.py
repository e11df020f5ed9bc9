"""Append-only session logs and snapshots on local disk.

One JSONL file per session, one JSON object per record, written in commit
order and flushed per append. Folding a log through the orchestrator's
``replay_records`` reconstructs the session exactly; the periodic snapshot
file is an inspection/monitoring artifact, not the recovery authority.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Any, TextIO

from .errors import StorageError

SNAPSHOT_EVERY = 40


def canonical_json(obj: Any) -> str:
    """Stable rendering used wherever byte-identical output matters."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


class SessionLog:
    """Per-session append-only record files under one root directory."""

    def __init__(self, root: str | Path, snapshot_every: int = SNAPSHOT_EVERY):
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageError(f"cannot create storage root {self.root}: {exc}") from exc
        self.snapshot_every = snapshot_every
        self._handles: dict[str, TextIO] = {}
        self._counts: dict[str, int] = {}
        self._lock = threading.Lock()

    def _path(self, session_id: str) -> Path:
        if not session_id or "/" in session_id or session_id.startswith("."):
            raise StorageError(f"invalid session id: {session_id!r}")
        return self.root / f"{session_id}.jsonl"

    def append(self, session_id: str, record: dict) -> None:
        with self._lock:
            handle = self._handles.get(session_id)
            if handle is None:
                try:
                    handle = self._path(session_id).open("a", encoding="utf-8")
                except OSError as exc:
                    raise StorageError(f"cannot open session log: {exc}") from exc
                self._handles[session_id] = handle
                self._counts.setdefault(session_id, 0)
            try:
                handle.write(canonical_json(record) + "\n")
                handle.flush()
            except OSError as exc:
                raise StorageError(f"cannot append to session log: {exc}") from exc
            self._counts[session_id] += 1

    def read(self, session_id: str) -> list[dict]:
        path = self._path(session_id)
        if not path.exists():
            return []
        records = []
        for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise StorageError(f"{path}:{line_no}: corrupt record: {exc}") from exc
        return records

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()

    def list_sessions(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.jsonl"))

    def record_count(self, session_id: str) -> int:
        with self._lock:
            return self._counts.get(session_id, 0)

    def write_snapshot(self, session_id: str, snapshot: dict) -> None:
        path = self.root / f"{session_id}.snapshot.json"
        tmp = path.with_suffix(".tmp")
        try:
            tmp.write_text(canonical_json(snapshot), encoding="utf-8")
            tmp.replace(path)
        except OSError as exc:
            raise StorageError(f"cannot write snapshot: {exc}") from exc

    def close(self, session_id: str | None = None) -> None:
        with self._lock:
            ids = [session_id] if session_id else list(self._handles)
            for sid in ids:
                handle = self._handles.pop(sid, None)
                if handle is not None:
                    handle.close()

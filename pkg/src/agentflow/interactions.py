"""Per-workflow interaction logs: prompts, outputs, approvals, postprocessing.

Each workflow accumulates a ``<stem>_interactions.json`` file under an
Interactions directory. The file holds JSON Lines: one record per line,
appended across runs, so a crash loses at most the in-flight record and the
file stays loadable after partial runs. Records carry a per-run ``seq`` that
the engine assigns; appends to the same file from concurrent runs are
serialized by a process-wide per-path lock.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable

from .errors import InteractionLogCorrupt

KINDS = ("run_start", "llm_call", "approval_event", "postprocess", "run_end")

# fixed serialization order so identical runs give byte-identical files
_FIELD_ORDER = (
    "seq",
    "run_id",
    "kind",
    "timestamp",
    "agent_name",
    "agent_role",
    "attempt",
    "input",
    "output",
    "model",
    "params",
)

_locks: dict[str, threading.Lock] = {}
_locks_guard = threading.Lock()


def _path_lock(path: Path) -> threading.Lock:
    key = str(path.resolve())
    with _locks_guard:
        return _locks.setdefault(key, threading.Lock())


@dataclass(frozen=True)
class InteractionRecord:
    seq: int
    run_id: str
    kind: str
    timestamp: str  # RFC 3339 UTC
    agent_name: str = ""
    agent_role: str = ""
    attempt: int | None = None
    input: str = ""
    output: str = ""
    model: str | None = None
    params: dict[str, Any] | None = None

    def to_dict(self) -> dict[str, Any]:
        data = {}
        for name in _FIELD_ORDER:
            value = getattr(self, name)
            if value is None:
                continue
            data[name] = value
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "InteractionRecord":
        return cls(
            seq=data["seq"],
            run_id=data["run_id"],
            kind=data["kind"],
            timestamp=data["timestamp"],
            agent_name=data.get("agent_name", ""),
            agent_role=data.get("agent_role", ""),
            attempt=data.get("attempt"),
            input=data.get("input", ""),
            output=data.get("output", ""),
            model=data.get("model"),
            params=data.get("params"),
        )


def encode_record(record: InteractionRecord) -> str:
    return json.dumps(record.to_dict(), ensure_ascii=False, separators=(",", ":"))


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def format_timestamp(moment: datetime) -> str:
    """RFC 3339 UTC with microseconds and a Z suffix."""
    if moment.tzinfo is not None:
        moment = moment.astimezone(timezone.utc)
    return f"{moment:%Y-%m-%dT%H:%M:%S}.{moment.microsecond:06d}Z"


def log_path(interactions_dir: str | Path, source_stem: str) -> Path:
    """Path of the interaction file for one workflow; creates the directory."""
    if not source_stem:
        raise ValueError("source_stem must be non-empty")
    directory = Path(interactions_dir)
    directory.mkdir(parents=True, exist_ok=True)
    return directory / f"{source_stem}_interactions.json"


class InteractionLog:
    """Append-only sink for one run, writing to a shared per-workflow file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = _path_lock(self.path)
        self._handle = open(self.path, "a", encoding="utf-8")

    def append(self, record: InteractionRecord) -> None:
        if self._handle.closed:
            raise ValueError(f"log {self.path} is closed")
        line = encode_record(record) + "\n"
        with self._lock:
            self._handle.write(line)
            self._handle.flush()
            os.fsync(self._handle.fileno())

    def close(self) -> None:
        if not self._handle.closed:
            self._handle.close()

    def __enter__(self) -> "InteractionLog":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


class MemoryLog:
    """In-memory sink with the same append contract, for tests and services."""

    def __init__(self) -> None:
        self.records: list[InteractionRecord] = []
        self._listeners: list[Callable[[InteractionRecord], None]] = []

    def subscribe(self, listener: Callable[[InteractionRecord], None]) -> None:
        self._listeners.append(listener)

    def append(self, record: InteractionRecord) -> None:
        self.records.append(record)
        for listener in self._listeners:
            listener(record)

    def close(self) -> None:
        pass


class TeeLog:
    """Fan one run's records out to several sinks (e.g. file + service events)."""

    def __init__(self, *sinks: Any):
        self.sinks = [s for s in sinks if s is not None]

    def append(self, record: InteractionRecord) -> None:
        for sink in self.sinks:
            sink.append(record)

    def close(self) -> None:
        for sink in self.sinks:
            sink.close()


def load_interactions(path: str | Path) -> list[InteractionRecord]:
    """Read every record in file order; reports corruption by line and byte offset."""
    path = Path(path)
    records: list[InteractionRecord] = []
    offset = 0
    with open(path, "rb") as handle:
        for line_number, raw_line in enumerate(handle, start=1):
            stripped = raw_line.strip()
            if stripped:
                try:
                    data = json.loads(stripped.decode("utf-8"))
                    records.append(InteractionRecord.from_dict(data))
                except (ValueError, KeyError) as exc:
                    raise InteractionLogCorrupt(
                        str(path), line_number, offset, str(exc)
                    ) from exc
            offset += len(raw_line)
    return records


def runs_in(records: Iterable[InteractionRecord]) -> list[str]:
    """Distinct run_ids in first-appearance order."""
    seen: dict[str, None] = {}
    for record in records:
        seen.setdefault(record.run_id, None)
    return list(seen)

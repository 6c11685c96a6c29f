"""Append-only event log.

Every state change is appended as one canonical-JSON line before it is
acknowledged; replaying the file rebuilds all projections.  Canonical form
(sorted keys, fixed separators) makes equal logs byte-equal.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Optional

from .errors import MalformedRecordError

SESSION_STARTED = "session_started"
PROMPT_SERVED = "prompt_served"
EXAMPLE_SUBMITTED = "example_submitted"
VALIDATION_ASSIGNED = "validation_assigned"
VALIDATION_VOTE = "validation_vote"
VALIDATION_RESOLVED = "validation_resolved"
BONUS_ACCRUED = "bonus_accrued"

EVENT_TYPES = frozenset(
    {
        SESSION_STARTED,
        PROMPT_SERVED,
        EXAMPLE_SUBMITTED,
        VALIDATION_ASSIGNED,
        VALIDATION_VOTE,
        VALIDATION_RESOLVED,
        BONUS_ACCRUED,
    }
)

_FIELDS = ("event_type", "session_id", "worker_id", "setting", "timestamp_ms", "payload")


@dataclass(frozen=True)
class EventRecord:
    event_type: str
    session_id: str
    worker_id: str
    setting: str
    timestamp_ms: int
    payload: dict

    def to_dict(self) -> dict:
        return {
            "event_type": self.event_type,
            "session_id": self.session_id,
            "worker_id": self.worker_id,
            "setting": self.setting,
            "timestamp_ms": self.timestamp_ms,
            "payload": self.payload,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def event_from_dict(obj: dict, line_no: int = 0) -> EventRecord:
    for field_name in _FIELDS:
        if field_name not in obj:
            raise MalformedRecordError(line_no, f"missing field {field_name!r}")
    if obj["event_type"] not in EVENT_TYPES:
        raise MalformedRecordError(line_no, f"unknown event_type {obj['event_type']!r}")
    if not isinstance(obj["timestamp_ms"], int):
        raise MalformedRecordError(line_no, "timestamp_ms must be an integer")
    if not isinstance(obj["payload"], dict):
        raise MalformedRecordError(line_no, "payload must be an object")
    return EventRecord(
        event_type=obj["event_type"],
        session_id=obj["session_id"],
        worker_id=obj["worker_id"],
        setting=obj["setting"],
        timestamp_ms=obj["timestamp_ms"],
        payload=obj["payload"],
    )


class EventLog:
    """In-memory event sequence, optionally mirrored to an NDJSON file."""

    def __init__(self, path: Optional[Path | str] = None):
        self.path = Path(path) if path is not None else None
        self._events: list[EventRecord] = []
        self._lock = threading.Lock()
        self._fp: Optional[IO[str]] = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fp = open(self.path, "a", encoding="utf-8")

    def append(self, event: EventRecord) -> EventRecord:
        with self._lock:
            if self._fp is not None:
                self._fp.write(event.to_json() + "\n")
                self._fp.flush()
            self._events.append(event)
        return event

    def events(self) -> list[EventRecord]:
        with self._lock:
            return list(self._events)

    def __len__(self) -> int:
        with self._lock:
            return len(self._events)

    def close(self) -> None:
        with self._lock:
            if self._fp is not None:
                self._fp.close()
                self._fp = None


def read_events(lines: Iterable[str]) -> Iterator[EventRecord]:
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(line_no, f"invalid JSON: {exc.msg}") from exc
        yield event_from_dict(obj, line_no)


def load_events(path: Path | str) -> list[EventRecord]:
    with open(path, encoding="utf-8") as fp:
        return list(read_events(fp))

"""Run event stream.

Events are sequence-numbered at the sink. The on-disk form is one JSON
record per line; :func:`to_sse` frames a record for a Server-Sent-Events
gateway without re-encoding the payload.
"""
from __future__ import annotations

import enum
import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

from .errors import CorruptLogError


class EventKind(enum.Enum):
    RUN_STARTED = "RunStarted"
    PHASE_STARTED = "PhaseStarted"
    PHASE_FINISHED = "PhaseFinished"
    SUB_QUESTION_STARTED = "SubQuestionStarted"
    SUB_QUESTION_FINISHED = "SubQuestionFinished"
    VERIFICATION_RECORDED = "VerificationRecorded"
    REPLAN_DECIDED = "ReplanDecided"
    STOP_TRIGGERED = "StopTriggered"
    SYNTHESIS_PRODUCED = "SynthesisProduced"
    RUN_FINISHED = "RunFinished"


@dataclass(frozen=True)
class RunEvent:
    seq: int
    timestamp: float
    kind: EventKind
    payload: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"seq": self.seq, "ts": self.timestamp, "kind": self.kind.value, "payload": self.payload}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunEvent":
        return cls(int(data["seq"]), float(data["ts"]), EventKind(data["kind"]), dict(data.get("payload", {})))


EventSink = Callable[[EventKind, dict], Any]


class EventLog:
    """Thread-safe sink assigning gap-free sequence numbers.

    ``clock`` supplies timestamps; pass a simulated clock for reproducible
    logs. Subscribers are called synchronously, in sequence order.
    """

    def __init__(self, clock: Callable[[], float] | None = None):
        self.clock = clock or time.time
        self.events: list[RunEvent] = []
        self._subscribers: list[Callable[[RunEvent], None]] = []
        self._lock = threading.Lock()

    def subscribe(self, callback: Callable[[RunEvent], None]) -> None:
        self._subscribers.append(callback)

    def emit(self, kind: EventKind, payload: dict | None = None) -> RunEvent:
        with self._lock:
            event = RunEvent(len(self.events), float(self.clock()), kind, dict(payload or {}))
            self.events.append(event)
            for cb in self._subscribers:
                cb(event)
        return event

    __call__ = emit

    def of_kind(self, *kinds: EventKind) -> list[RunEvent]:
        return [e for e in self.events if e.kind in kinds]

    def to_ndjson(self) -> str:
        return dump_events(self.events)

    def digest(self) -> str:
        return hashlib.sha256(self.to_ndjson().encode()).hexdigest()


def dump_events(events: Iterable[RunEvent]) -> str:
    return "".join(e.to_json() + "\n" for e in events)


def to_sse(event: RunEvent) -> str:
    return f"event: {event.kind.value}\nid: {event.seq}\ndata: {event.to_json()}\n\n"


def parse_events(text: str, *, require_finished: bool = True) -> list[RunEvent]:
    """Parse an NDJSON log, checking sequence numbers are 0, 1, 2, ...

    Raises :class:`CorruptLogError` naming the first bad sequence number.
    A log that does not end in ``RunFinished`` is treated as truncated.
    """
    events: list[RunEvent] = []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for expected, line in enumerate(lines):
        try:
            event = RunEvent.from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptLogError(expected, f"unparseable record ({exc.__class__.__name__})") from None
        if event.seq != expected:
            raise CorruptLogError(expected, f"found sequence {event.seq}")
        events.append(event)
    if not events:
        raise CorruptLogError(0, "empty log")
    if require_finished and events[-1].kind is not EventKind.RUN_FINISHED:
        raise CorruptLogError(len(events), "log ends before RunFinished (truncated)")
    return events


def read_events(path: str | Path, **kwargs) -> list[RunEvent]:
    return parse_events(Path(path).read_text(), **kwargs)

"""Run store: one directory per run holding ``plan.json``, ``state.json`` and ``events.log``."""
from __future__ import annotations

import json
import uuid
from pathlib import Path
from typing import Iterable

from .errors import RunNotFoundError, RunStoreError
from .events import RunEvent, dump_events, read_events
from .orchestrator import OrchestrationState

PLAN_FILE = "plan.json"
STATE_FILE = "state.json"
EVENTS_FILE = "events.log"


def write_run_dir(path: str | Path, state: OrchestrationState | None, events: Iterable[RunEvent] = ()) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if state is not None:
        (path / PLAN_FILE).write_text(state.plan.to_json())
        (path / STATE_FILE).write_text(json.dumps(state.to_dict(), indent=1))
    (path / EVENTS_FILE).write_text(dump_events(events))
    return path


def read_state(path: str | Path) -> OrchestrationState:
    file = Path(path) / STATE_FILE
    if not file.exists():
        raise RunNotFoundError(f"no stored state at {path}")
    try:
        return OrchestrationState.from_dict(json.loads(file.read_text()))
    except (ValueError, KeyError, TypeError) as exc:
        raise RunStoreError(f"corrupt state record in {path}: {exc!r}") from exc


class RunStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path(self, run_id: str) -> Path:
        return self.root / run_id

    def persist(self, state: OrchestrationState, events: Iterable[RunEvent] = (), run_id: str | None = None) -> str:
        run_id = run_id or uuid.uuid4().hex[:12]
        write_run_dir(self.path(run_id), state, events)
        return run_id

    def load(self, run_id: str) -> OrchestrationState:
        if not self.path(run_id).is_dir():
            raise RunNotFoundError(f"unknown run id {run_id!r}")
        return read_state(self.path(run_id))

    def events(self, run_id: str) -> list[RunEvent]:
        if not self.path(run_id).is_dir():
            raise RunNotFoundError(f"unknown run id {run_id!r}")
        return read_events(self.path(run_id) / EVENTS_FILE)

    def runs(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if (p / STATE_FILE).exists())


def persist_state(state: OrchestrationState, store: RunStore, events: Iterable[RunEvent] = ()) -> str:
    return store.persist(state, events)


def load_state(run_id: str, store: RunStore) -> OrchestrationState:
    return store.load(run_id)

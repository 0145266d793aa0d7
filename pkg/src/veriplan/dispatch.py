"""How agent executions are actually run.

The executor's coordinator loop is the same in production and in
simulation; only the dispatcher differs.

``ThreadedDispatch`` runs each execution on its own daemon thread and
enforces the wall-clock timeout by abandoning the thread (Python threads
cannot be killed; a late answer is discarded).

``SimulatedDispatch`` runs the backend call inline and treats the
result's reported ``duration`` as virtual latency on a :class:`SimClock`,
so runs are reproducible and take no real time.
"""
from __future__ import annotations

import heapq
import itertools
import queue
import threading
import time
from dataclasses import dataclass
from typing import Callable, Hashable, Protocol

from .results import AgentResult


@dataclass(frozen=True)
class Finished:
    key: Hashable
    result: AgentResult | None
    elapsed: float
    timed_out: bool = False
    error: str | None = None


class Dispatch(Protocol):
    def now(self) -> float: ...

    def start(self, key: Hashable, fn: Callable[[], AgentResult], timeout: float) -> None: ...

    def wait(self) -> Finished: ...


class SimClock:
    def __init__(self, start: float = 0.0):
        self.t = float(start)

    def __call__(self) -> float:
        return self.t

    def advance_to(self, t: float) -> None:
        if t < self.t:
            raise ValueError("simulated clock cannot run backwards")
        self.t = t


class SimulatedDispatch:
    def __init__(self, clock: SimClock | None = None):
        self.clock = clock or SimClock()
        self._heap: list[tuple[float, int, Finished]] = []
        self._order = itertools.count()

    def now(self) -> float:
        return self.clock()

    def start(self, key, fn, timeout):
        try:
            result = fn()
            latency, error = max(0.0, float(result.duration)), None
        except Exception as exc:
            result, latency, error = None, 0.0, getattr(exc, "tag", "error")
        timed_out = latency > timeout
        if timed_out:
            result, latency = None, float(timeout)
        done = Finished(key, result, latency, timed_out, error)
        heapq.heappush(self._heap, (self.clock() + latency, next(self._order), done))

    def wait(self) -> Finished:
        if not self._heap:
            raise RuntimeError("wait() with nothing in flight")
        at, _, done = heapq.heappop(self._heap)
        self.clock.advance_to(at)
        return done


class ThreadedDispatch:
    def __init__(self, clock: Callable[[], float] = time.monotonic):
        self._clock = clock
        self._queue: queue.Queue = queue.Queue()
        self._outstanding: dict[int, tuple[Hashable, float, float]] = {}
        self._tokens = itertools.count()

    def now(self) -> float:
        return self._clock()

    def start(self, key, fn, timeout):
        token = next(self._tokens)
        started = self._clock()
        self._outstanding[token] = (key, started, started + timeout)

        def work():
            t0 = self._clock()
            try:
                result, error = fn(), None
            except Exception as exc:
                result, error = None, getattr(exc, "tag", "error")
            self._queue.put((token, result, self._clock() - t0, error))

        threading.Thread(target=work, name=f"agent-{key}", daemon=True).start()

    def wait(self) -> Finished:
        if not self._outstanding:
            raise RuntimeError("wait() with nothing in flight")
        while True:
            token, (key, started, deadline) = min(self._outstanding.items(), key=lambda kv: kv[1][2])
            remaining = deadline - self._clock()
            try:
                got, result, elapsed, error = self._queue.get(timeout=max(0.0, remaining))
            except queue.Empty:
                del self._outstanding[token]
                return Finished(key, None, self._clock() - started, timed_out=True)
            if got not in self._outstanding:
                continue  # answer from an execution that already timed out
            key, started, deadline = self._outstanding.pop(got)
            if elapsed > deadline - started:
                return Finished(key, None, elapsed, timed_out=True)
            return Finished(key, result, elapsed, error=error)

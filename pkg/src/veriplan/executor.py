"""Dependency-aware parallel execution of a plan.

The coordinator loop owns all scheduling state. By default it refills a
slot as soon as any execution finishes; ``strict_barrier`` instead waits
for the whole batch before selecting the next one (the literal batch
loop: ready set, top-k by priority, run, repeat).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .backends.base import AgentRequest, BackendRegistry, route_with_fallback
from .backends.tools import ToolSession
from .dispatch import Dispatch, ThreadedDispatch
from .errors import InvalidPlanError, SchedulingError
from .events import EventKind, EventSink
from .limiter import (
    MAX_CONSECUTIVE_SAME_TOOL,
    MAX_TOTAL_TOOL_CALLS,
    Allow,
    Deny,
    ToolCallLimiter,
    record_tool_call,
)
from .plan import ExecutionPlan, SubQuestion, validate_plan
from .results import AgentResult, failed_result

__all__ = [
    "Allow",
    "Deny",
    "ExecutorConfig",
    "ToolCallLimiter",
    "enrich_with_context",
    "execute_plan",
    "ready_set",
    "record_tool_call",
    "select_batch",
]

CONTEXT_OPEN = "=== context from {id} ==="
CONTEXT_CLOSE = "=== end context {id} ==="


@dataclass(frozen=True)
class ExecutorConfig:
    max_concurrent: int | None = 3  # None = unbounded
    agent_timeout: float = 600.0
    max_consecutive_same_tool: int = MAX_CONSECUTIVE_SAME_TOOL
    max_total_tool_calls: int = MAX_TOTAL_TOOL_CALLS
    strict_barrier: bool = False

    def __post_init__(self):
        if self.max_concurrent is not None and self.max_concurrent < 1:
            raise ValueError("max_concurrent must be positive")
        if self.agent_timeout <= 0:
            raise ValueError("agent_timeout must be positive")
        if self.max_consecutive_same_tool < 1 or self.max_total_tool_calls < 1:
            raise ValueError("tool-call limits must be positive")

    def new_limiter(self) -> ToolCallLimiter:
        return ToolCallLimiter(self.max_consecutive_same_tool, self.max_total_tool_calls)


def ready_set(plan: ExecutionPlan, completed: set[str]) -> set[SubQuestion]:
    return {sq for sq in plan.sub_questions if sq.id not in completed and sq.dependencies <= completed}


def select_batch(ready: Iterable[SubQuestion], k: int | float) -> list[SubQuestion]:
    """Highest priority first, ties broken by ascending id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ordered = sorted(ready, key=lambda sq: (-sq.priority, sq.id))
    return ordered if math.isinf(k) else ordered[: int(k)]


def enrich_with_context(sub_question: SubQuestion, dep_results: Mapping[str, AgentResult]) -> str:
    blocks = []
    for dep in sorted(sub_question.dependencies):
        if dep not in dep_results:
            raise SchedulingError(f"{sub_question.id}: no result for dependency {dep}")
        blocks.append(
            "\n".join([CONTEXT_OPEN.format(id=dep), dep_results[dep].content, CONTEXT_CLOSE.format(id=dep)])
        )
    return "\n\n".join(blocks + [sub_question.question])


def _prompt_for(sq: SubQuestion, available: Mapping[str, AgentResult]) -> str:
    if not sq.context_from_deps or not sq.dependencies:
        return sq.question
    return enrich_with_context(sq, available)


def execute_plan(
    plan: ExecutionPlan,
    pending: Iterable[str],
    agents: BackendRegistry,
    config: ExecutorConfig,
    events: EventSink | None = None,
    *,
    results: Mapping[str, AgentResult] | None = None,
    dispatch: Dispatch | None = None,
) -> dict[str, AgentResult]:
    """Run every pending sub-question once and return the new results.

    ``results`` holds earlier results of the non-pending ids; they feed
    dependency context and decide the attempt number of retried ids.
    Failures and timeouts produce failure-marked results and still count
    as completed for scheduling.
    """
    report = validate_plan(plan)
    if not report.ok:
        raise InvalidPlanError(report)
    pending = set(pending)
    by_id = plan.by_id()
    if pending - by_id.keys():
        raise SchedulingError(f"pending ids not in plan: {sorted(pending - by_id.keys())}")
    agents.check_covers(by_id[i].agent_type for i in pending)

    emit = events or (lambda kind, payload: None)
    dispatch = dispatch or ThreadedDispatch()
    prior = dict(results or {})
    available = {k: v for k, v in prior.items() if k not in pending}
    completed = set(by_id) - pending
    produced: dict[str, AgentResult] = {}
    in_flight: dict[str, tuple[int, ToolSession]] = {}
    width = math.inf if config.max_concurrent is None else config.max_concurrent

    def launch(sq: SubQuestion) -> None:
        attempt = prior[sq.id].attempt + 1 if sq.id in prior else 1
        prompt = _prompt_for(sq, available)
        session = ToolSession(agents.tools, config.new_limiter())
        request = AgentRequest(sq, prompt, attempt, session)
        in_flight[sq.id] = (attempt, session)
        emit(
            EventKind.SUB_QUESTION_STARTED,
            {"id": sq.id, "agent_type": sq.agent_type.value, "attempt": attempt, "priority": sq.priority},
        )
        dispatch.start(sq.id, lambda: route_with_fallback(sq.agent_type, request, agents), config.agent_timeout)

    while len(produced) < len(pending):
        if not (config.strict_barrier and in_flight):
            ready = [sq for sq in ready_set(plan, completed) if sq.id not in in_flight]
            free = width - len(in_flight)
            if ready and free >= 1:
                for sq in select_batch(ready, free):
                    launch(sq)
        if not in_flight:
            raise SchedulingError("no runnable sub-question but work remains")

        done = dispatch.wait()
        sq_id = done.key
        attempt, session = in_flight.pop(sq_id)
        trace = tuple(session.trace)
        if done.timed_out:
            result = failed_result(sq_id, "timeout", attempt=attempt, duration=done.elapsed, trace=trace)
        elif done.result is None:
            result = failed_result(sq_id, done.error or "error", attempt=attempt, duration=done.elapsed, trace=trace)
        else:
            result = replace(
                done.result,
                sub_question_id=sq_id,
                attempt=attempt,
                merged_from_attempts=(),
                duration=done.elapsed,
                tool_trace=trace + tuple(done.result.tool_trace),
            )
        produced[sq_id] = result
        available[sq_id] = result
        completed.add(sq_id)
        emit(
            EventKind.SUB_QUESTION_FINISHED,
            {
                "id": sq_id,
                "attempt": attempt,
                "failure": result.failure,
                "degraded": result.degraded,
                "tokens": result.tokens_used,
                "duration": result.duration,
            },
        )
    return produced

"""Backend interfaces and the registry that wires them into a run.

Every LLM-facing role is a plain synchronous request/response object. The
engine never inspects how a backend produces its answer, only the
returned domain object (plus the ``tokens_used`` it reports).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Iterable, Protocol, runtime_checkable

from ..errors import RegistrationError
from ..plan import AgentType, ExecutionPlan, SubQuestion
from ..results import FALLBACK_MARKER, AgentResult, ToolTraceEntry, failed_result

if TYPE_CHECKING:
    from ..replanning import ReplanDecision, ReplanRequest
    from ..synthesis import FinalAnswer, GroupSummary, GroupSummaryRequest, SynthesisRequest
    from ..verification import VerificationRecord, VerificationRequest
    from .tools import ToolSession


@dataclass
class AgentRequest:
    sub_question: SubQuestion
    # question text after dependency-context enrichment
    prompt: str
    attempt: int = 1
    tools: "ToolSession | None" = None


@runtime_checkable
class PlannerBackend(Protocol):
    def plan(self, query: str, available_agents: list[AgentType]) -> ExecutionPlan: ...


@runtime_checkable
class AgentBackend(Protocol):
    def run(self, request: AgentRequest) -> AgentResult: ...


@runtime_checkable
class VerifierBackend(Protocol):
    def verify(self, request: "VerificationRequest") -> "VerificationRecord": ...


@runtime_checkable
class ReplannerBackend(Protocol):
    def replan(self, request: "ReplanRequest") -> "ReplanDecision": ...


@runtime_checkable
class SynthesizerBackend(Protocol):
    def summarize_group(self, request: "GroupSummaryRequest") -> "GroupSummary": ...

    def synthesize(self, request: "SynthesisRequest") -> "FinalAnswer": ...


@dataclass
class BackendRegistry:
    planner: PlannerBackend
    agents: dict[AgentType, AgentBackend]
    verifier: VerifierBackend
    replanner: ReplannerBackend
    synthesizer: SynthesizerBackend
    fallback_agents: dict[AgentType, AgentBackend] = field(default_factory=dict)
    # HTTP endpoint or local tool table handed to agents via ToolSession
    tools: object = None

    def agent_for(self, agent_type: AgentType) -> AgentBackend:
        try:
            return self.agents[agent_type]
        except KeyError:
            raise RegistrationError(f"no agent registered for {agent_type.value}") from None

    def check_covers(self, agent_types: Iterable[AgentType]) -> None:
        missing = sorted({t.value for t in agent_types if t not in self.agents})
        if missing:
            raise RegistrationError("no agent registered for: " + ", ".join(missing))


def _run_guarded(backend: AgentBackend, request: AgentRequest) -> tuple[AgentResult | None, str]:
    try:
        result = backend.run(request)
    except Exception as exc:
        return None, getattr(exc, "tag", "error")
    if result.failed:
        return result, result.failure or "error"
    return result, ""


def route_with_fallback(agent_type: AgentType, request: AgentRequest, registry: BackendRegistry) -> AgentResult:
    """Run the primary agent, falling back to the secondary on failure.

    A fallback success is tagged degraded in its tool trace. If both fail
    (or no fallback is registered) a failure-marked result comes back.
    """
    sq_id = request.sub_question.id
    primary = registry.agent_for(agent_type)
    result, failure = _run_guarded(primary, request)
    if not failure:
        return result
    trace = tuple(result.tool_trace) if result is not None else ()
    spent = result.duration if result is not None else 0.0
    tokens = result.tokens_used if result is not None else 0
    trace += (ToolTraceEntry("primary", "failed:" + failure),)

    fallback = registry.fallback_agents.get(agent_type)
    if fallback is None:
        return failed_result(sq_id, failure, attempt=request.attempt, duration=spent, tokens_used=tokens, trace=trace)
    second, second_failure = _run_guarded(fallback, request)
    if not second_failure:
        return replace(
            second,
            tool_trace=trace + tuple(second.tool_trace) + (ToolTraceEntry(FALLBACK_MARKER, "degraded"),),
            duration=spent + second.duration,
            tokens_used=tokens + second.tokens_used,
        )
    if second is not None:
        trace += tuple(second.tool_trace)
        spent += second.duration
        tokens += second.tokens_used
    trace += (ToolTraceEntry(FALLBACK_MARKER, "failed:" + second_failure),)
    return failed_result(sq_id, second_failure, attempt=request.attempt, duration=spent, tokens_used=tokens, trace=trace)

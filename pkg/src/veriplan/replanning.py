"""Corrective actions after verification, and merging of retry attempts."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Mapping

from .errors import SchedulingError
from .plan import DEFAULT_PRIORITY, ExecutionPlan, SubQuestion
from .results import AgentResult, dedup_sources
from .stopping import OrchestrationConfig
from .verification import Recommendation, Status, VerificationRecord, completeness_ratio

if TYPE_CHECKING:
    from .orchestrator import OrchestrationState

# below this completeness the replanner may only retry, not add questions
NEW_QUESTION_MIN_RATIO = 0.5


@dataclass(frozen=True)
class ReplanDecision:
    retry_sub_questions: tuple[str, ...] = ()
    new_sub_questions: tuple[SubQuestion, ...] = ()
    explanation: str = ""
    done: bool = False
    tokens_used: int = 0
    # engine-side corrections applied to the backend's answer
    repairs: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "retry_sub_questions", tuple(self.retry_sub_questions))
        object.__setattr__(self, "new_sub_questions", tuple(self.new_sub_questions))
        object.__setattr__(self, "repairs", tuple(self.repairs))
        if self.done and (self.retry_sub_questions or self.new_sub_questions):
            raise ValueError("a done decision carries no actions")

    @property
    def has_actions(self) -> bool:
        return bool(self.retry_sub_questions or self.new_sub_questions)

    def to_dict(self) -> dict[str, Any]:
        return {
            "retry_sub_questions": list(self.retry_sub_questions),
            "new_sub_questions": [sq.to_dict() for sq in self.new_sub_questions],
            "explanation": self.explanation,
            "done": self.done,
            "tokens_used": self.tokens_used,
            "repairs": list(self.repairs),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ReplanDecision":
        new = []
        for i, raw in enumerate(data.get("new_sub_questions") or ()):
            raw = dict(raw)
            raw.setdefault("id", f"replan_{i + 1}")
            raw.setdefault("priority", DEFAULT_PRIORITY)
            raw.setdefault("context_from_deps", False)
            new.append(SubQuestion.from_dict(raw))
        retry = [str(x) for x in data.get("retry_sub_questions") or ()]
        done = bool(data.get("done", False))
        if done and (retry or new):
            done = False
        return cls(
            tuple(retry),
            tuple(new),
            str(data.get("explanation", "")),
            done,
            int(data.get("tokens_used", data.get("tokens", 0))),
            tuple(data.get("repairs") or ()),
        )


@dataclass
class ReplanRequest:
    query: str
    plan: ExecutionPlan
    # id -> excerpt of the accepted answer
    complete: dict[str, str] = field(default_factory=dict)
    # id -> verification record of everything not yet complete
    incomplete: dict[str, VerificationRecord] = field(default_factory=dict)
    iteration: int = 0
    max_iterations: int = 3


def mandatory_retries(plan: ExecutionPlan, records: Mapping[str, VerificationRecord]) -> list[str]:
    """Ids that must be retried: status incomplete, or partial with a retry recommendation."""
    out = []
    for sq_id in plan.ids:
        rec = records.get(sq_id)
        if rec is None:
            continue
        if rec.status is Status.INCOMPLETE or (
            rec.status is Status.PARTIAL and rec.recommendation is Recommendation.RETRY
        ):
            out.append(sq_id)
    return out


def _fresh_id(base: str, taken: set[str]) -> str:
    n = 2
    while f"{base}_{n}" in taken:
        n += 1
    return f"{base}_{n}"


def decide_replan(
    state: "OrchestrationState",
    records: Mapping[str, VerificationRecord],
    config: OrchestrationConfig,
    backend,
) -> ReplanDecision:
    """Ask the replanner for actions, then enforce the decision rules on its answer.

    The backend cannot drop a mandatory retry, retry an already-complete
    id, reuse an existing id, or add questions outside the permitted
    completeness band (unless contradictions were reported).
    """
    plan = state.plan
    ratio = completeness_ratio(records)
    if state.iteration >= config.max_iterations:
        return ReplanDecision(explanation=f"iteration {state.iteration} >= max {config.max_iterations}", done=True)
    if ratio > config.ready_threshold:
        return ReplanDecision(explanation=f"completeness {ratio:.3f} > {config.ready_threshold}", done=True)

    mandatory = mandatory_retries(plan, records)
    request = ReplanRequest(
        query=state.query,
        plan=plan,
        complete={i: state.results[i].content[:500] for i, r in records.items() if r.complete and i in state.results},
        incomplete={i: r for i, r in records.items() if not r.complete},
        iteration=state.iteration,
        max_iterations=config.max_iterations,
    )
    repairs: list[str] = []
    try:
        raw = backend.replan(request)
        if not isinstance(raw, ReplanDecision):
            raw = ReplanDecision.from_dict(raw)
    except Exception as exc:
        repairs.append(f"replanner failed ({exc}); retrying all incomplete ids")
        return ReplanDecision(tuple(mandatory), (), "fallback decision", False, 0, tuple(repairs))

    plan_ids = set(plan.ids)
    asked = set()
    for sq_id in raw.retry_sub_questions:
        if sq_id not in plan_ids:
            repairs.append(f"dropped retry of unknown id {sq_id}")
        elif records.get(sq_id) is not None and records[sq_id].complete:
            repairs.append(f"dropped retry of complete id {sq_id}")
        else:
            asked.add(sq_id)
    for sq_id in mandatory:
        if sq_id not in asked:
            repairs.append(f"added omitted incomplete id {sq_id}")
            asked.add(sq_id)
    retry = tuple(i for i in plan.ids if i in asked)

    contradictions = any(r.contradictions for r in records.values())
    in_band = NEW_QUESTION_MIN_RATIO <= ratio <= config.ready_threshold
    new: list[SubQuestion] = []
    if raw.new_sub_questions and not (in_band or contradictions):
        repairs.append(f"dropped {len(raw.new_sub_questions)} new question(s): completeness {ratio:.3f} outside band")
    else:
        taken = set(plan_ids)
        for sq in raw.new_sub_questions:
            if sq.id in taken:
                renamed = _fresh_id(sq.id, taken)
                repairs.append(f"renamed colliding new id {sq.id} -> {renamed}")
                sq = replace(sq, id=renamed)
            taken.add(sq.id)
            new.append(sq)

    done = raw.done and not retry and not new
    return ReplanDecision(retry, tuple(new), raw.explanation, done, raw.tokens_used, tuple(repairs))


def _attempt_header(result: AgentResult) -> str:
    if result.failed:
        return f"### Attempt {result.attempt} (failed: {result.failure})"
    return f"### Attempt {result.attempt}"


def _headed_content(result: AgentResult) -> str:
    # merged results already carry per-attempt headers
    if result.merged_from_attempts:
        return result.content
    return f"{_attempt_header(result)}\n{result.content}".rstrip("\n")


def merge_results(previous: AgentResult, retry: AgentResult) -> AgentResult:
    """Fold a retry into the earlier result without discarding anything."""
    if previous.sub_question_id != retry.sub_question_id:
        raise SchedulingError(
            f"cannot merge results of {previous.sub_question_id} and {retry.sub_question_id}"
        )
    if retry.attempt <= previous.attempt:
        raise SchedulingError("retry attempt must follow the previous attempt")
    lineage = sorted(set(previous.merged_from_attempts) | {previous.attempt} | set(retry.merged_from_attempts))
    if previous.failed and retry.failed:
        # nothing to preserve yet; stay failure-marked so verification short-circuits
        content = ""
    else:
        content = _headed_content(previous) + "\n\n" + _headed_content(retry)
    return AgentResult(
        sub_question_id=previous.sub_question_id,
        content=content,
        sources=tuple(dedup_sources(previous.sources, retry.sources)),
        tokens_used=previous.tokens_used + retry.tokens_used,
        tool_trace=previous.tool_trace + retry.tool_trace,
        duration=previous.duration + retry.duration,
        attempt=retry.attempt,
        merged_from_attempts=tuple(lineage),
    )

"""The Plan -> Execute -> Verify -> (stop? Synthesize : Replan -> Execute ...) loop.

Iteration numbering: the initial execute pass is iteration 0 and each
replan-triggered re-execution adds one, so ``max_iterations = 3`` permits
three corrective cycles after the first pass (four verify phases at most).
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Any

from .backends.base import BackendRegistry
from .backends.ledger import Phase, TokenLedger
from .dispatch import Dispatch, SimulatedDispatch, ThreadedDispatch
from .errors import BackendError, InvalidPlanError, VeriplanError
from .events import EventKind, EventLog, RunEvent
from .executor import ExecutorConfig, execute_plan
from .plan import AgentType, ExecutionPlan, SubQuestion, validate_plan
from .replanning import decide_replan, merge_results
from .results import AgentResult
from .stopping import OrchestrationConfig, StopDecision, StopOutcome, budget_stop, evaluate_stop
from .synthesis import FinalAnswer, collect_gaps, synthesize
from .verification import (
    Recommendation,
    VerificationRecord,
    completeness_ratio,
    mean_confidence,
    mean_score,
    verify_results,
)


class RunMode(enum.Enum):
    FULL = "full"
    STATIC_PIPELINE = "static_pipeline"
    SINGLE_AGENT = "single_agent"


STATIC_SEQUENCE = (AgentType.RAG, AgentType.WEB_SEARCH, AgentType.FINANCIAL, AgentType.ANALYSIS)


def baseline_plan(query: str, mode: RunMode) -> ExecutionPlan:
    if mode is RunMode.SINGLE_AGENT:
        sq = SubQuestion("single_agent", query, AgentType.REASONING, priority=10)
        return ExecutionPlan((sq,), "single reasoning agent with every tool")
    if mode is RunMode.STATIC_PIPELINE:
        sqs, prev = [], None
        for n, agent_type in enumerate(STATIC_SEQUENCE, 1):
            sq_id = f"pipeline_{n}_{agent_type.value}"
            deps = frozenset({prev}) if prev else frozenset()
            sqs.append(SubQuestion(sq_id, query, agent_type, deps, context_from_deps=prev is not None))
            prev = sq_id
        return ExecutionPlan(tuple(sqs), "fixed agent sequence, no verification or replanning")
    raise ValueError(f"{mode} has no fixed plan")


@dataclass
class OrchestrationState:
    query: str
    plan: ExecutionPlan
    iteration: int = 0
    results: dict[str, AgentResult] = field(default_factory=dict)
    records: dict[str, VerificationRecord] = field(default_factory=dict)
    completeness_history: list[float] = field(default_factory=list)
    ledger: TokenLedger = field(default_factory=TokenLedger)
    stop: StopDecision | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "query": self.query,
            "plan": self.plan.to_dict(),
            "iteration": self.iteration,
            "results": {k: v.to_dict() for k, v in self.results.items()},
            "records": {k: v.to_dict() for k, v in self.records.items()},
            "completeness_history": list(self.completeness_history),
            "ledger": self.ledger.to_dict(),
            "stop": self.stop.to_dict() if self.stop else None,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "OrchestrationState":
        return cls(
            query=data["query"],
            plan=ExecutionPlan.from_dict(data["plan"]),
            iteration=int(data["iteration"]),
            results={k: AgentResult.from_dict(v) for k, v in data["results"].items()},
            records={k: VerificationRecord.from_dict(v) for k, v in data["records"].items()},
            completeness_history=[float(x) for x in data["completeness_history"]],
            ledger=TokenLedger.from_dict(data["ledger"]),
            stop=StopDecision.from_dict(data["stop"]) if data.get("stop") else None,
        )


@dataclass
class RunReport:
    status: str  # "completed" | "failed"
    mode: RunMode
    answer: FinalAnswer | None
    state: OrchestrationState | None
    events: list[RunEvent]
    error: str | None = None
    # baseline modes only: records from a post-hoc, unmetered verifier pass
    evaluation: dict[str, VerificationRecord] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "completed"

    @property
    def final_completeness(self) -> float:
        if self.mode is not RunMode.FULL:
            return completeness_ratio(self.evaluation)
        if self.state is None or not self.state.completeness_history:
            return 0.0
        return self.state.completeness_history[-1]

    def render(self) -> str:
        from .report import render_report

        return render_report(self.events)


class _Run:
    """One run's coordinator; owns every piece of mutable state."""

    def __init__(self, query, config, registry, log, mode, dispatch, executor_config):
        self.query = query
        self.config = config
        self.registry = registry
        self.log = log
        self.mode = mode
        self.dispatch = dispatch
        self.exec_config = executor_config or ExecutorConfig(
            max_concurrent=config.max_concurrent, agent_timeout=config.agent_timeout
        )
        self.ledger = TokenLedger()
        self.state: OrchestrationState | None = None
        self.workers = config.max_concurrent

    # -- event helpers -------------------------------------------------
    def phase_started(self, phase: Phase) -> None:
        self.log.emit(EventKind.PHASE_STARTED, {"phase": phase.value, "iteration": self.iteration})

    def phase_finished(self, phase: Phase, tokens: int, **summary) -> None:
        self.log.emit(
            EventKind.PHASE_FINISHED,
            {
                "phase": phase.value,
                "iteration": self.iteration,
                "tokens": tokens,
                "ledger_total": self.ledger.total,
                **summary,
            },
        )

    @property
    def iteration(self) -> int:
        return self.state.iteration if self.state else 0

    def charge(self, phase: Phase, amount: int) -> int:
        self.ledger.charge(phase, amount)
        return amount

    def over_budget(self) -> bool:
        return self.ledger.total >= self.config.token_budget

    # -- phases --------------------------------------------------------
    def do_plan(self) -> None:
        self.phase_started(Phase.PLAN)
        if self.mode is RunMode.FULL:
            plan = self.registry.planner.plan(self.query, list(self.registry.agents))
        else:
            plan = baseline_plan(self.query, self.mode)
        report = validate_plan(plan)
        if not report.ok:
            raise InvalidPlanError(report)
        self.registry.check_covers(sq.agent_type for sq in plan)
        tokens = self.charge(Phase.PLAN, plan.tokens_used)
        self.state = OrchestrationState(self.query, plan, ledger=self.ledger)
        self.phase_finished(
            Phase.PLAN, tokens, sub_questions=plan.ids, explanation=plan.explanation, mode=self.mode.value
        )

    def do_execute(self, pending: list[str]) -> None:
        state = self.state
        self.phase_started(Phase.EXECUTE)

        def sink(kind, payload):
            self.log.emit(kind, {**payload, "iteration": state.iteration})

        fresh = execute_plan(
            state.plan, pending, self.registry, self.exec_config, sink, results=state.results, dispatch=self.dispatch
        )
        tokens = 0
        for sq_id in state.plan.ids:
            if sq_id not in fresh:
                continue
            new = fresh[sq_id]
            tokens += self.charge(Phase.EXECUTE, new.tokens_used)
            prev = state.results.get(sq_id)
            state.results[sq_id] = merge_results(prev, new) if prev is not None else new
        self.phase_finished(Phase.EXECUTE, tokens, executed=[i for i in state.plan.ids if i in fresh])

    def do_verify(self) -> None:
        state = self.state
        self.phase_started(Phase.VERIFY)
        prior = state.records
        records = verify_results(state.plan, state.results, prior, self.registry.verifier, max_workers=self.workers)
        tokens = 0
        for sq_id, rec in records.items():
            reused = prior.get(sq_id) is rec
            if not reused:
                tokens += self.charge(Phase.VERIFY, rec.tokens_used)
            self.log.emit(
                EventKind.VERIFICATION_RECORDED,
                {
                    "id": sq_id,
                    "iteration": state.iteration,
                    "status": rec.status.value,
                    "score": rec.completeness_score,
                    "confidence": rec.confidence,
                    "recommendation": rec.recommendation.value,
                    "missing_aspects": list(rec.missing_aspects),
                    "contradictions": list(rec.contradictions),
                    "reused": reused,
                    "escalated": rec.recommendation is Recommendation.ESCALATE,
                },
            )
        state.records = records
        ratio = completeness_ratio(records)
        state.completeness_history.append(ratio)
        self.phase_finished(
            Phase.VERIFY,
            tokens,
            completeness=ratio,
            complete=sum(1 for r in records.values() if r.complete),
            verified=len(records),
            mean_confidence=mean_confidence(records),
            mean_score=mean_score(records),
        )

    def do_replan(self) -> list[str] | None:
        """Returns the ids to execute next, or None when nothing is left to try."""
        state = self.state
        self.phase_started(Phase.REPLAN)
        decision = decide_replan(state, state.records, self.config, self.registry.replanner)
        tokens = self.charge(Phase.REPLAN, decision.tokens_used)
        added: list[str] = []
        remaining = list(decision.new_sub_questions)
        progress = True
        while remaining and progress:
            progress = False
            for sq in list(remaining):
                candidate = state.plan.extended([sq])
                if validate_plan(candidate).ok:
                    state.plan = candidate
                    added.append(sq.id)
                    remaining.remove(sq)
                    progress = True
        dropped = [sq.id for sq in remaining]
        pending = [i for i in state.plan.ids if i in set(decision.retry_sub_questions) | set(added)]
        self.log.emit(
            EventKind.REPLAN_DECIDED,
            {
                "iteration": state.iteration,
                "retry": list(decision.retry_sub_questions),
                "new": added,
                "new_questions": {sq.id: sq.question for sq in decision.new_sub_questions if sq.id in added},
                "rejected_new": dropped,
                "explanation": decision.explanation,
                "done": decision.done,
                "repairs": list(decision.repairs),
            },
        )
        self.phase_finished(Phase.REPLAN, tokens, retry=len(decision.retry_sub_questions), new=len(added))
        return pending or None

    def do_synthesize(self) -> FinalAnswer:
        state = self.state
        self.phase_started(Phase.SYNTHESIZE)
        if state.results:
            answer = synthesize(
                self.query, state.plan, state.results, state.records, self.registry.synthesizer, max_workers=self.workers
            )
        else:
            answer = FinalAnswer(
                executive_summary="No results were produced before the run stopped.",
                confidence=0.0,
                gaps=tuple(collect_gaps(state.plan, state.results, state.records)),
            )
        tokens = self.charge(Phase.SYNTHESIZE, answer.tokens_used)
        self.phase_finished(Phase.SYNTHESIZE, tokens, over_budget=self.over_budget())
        return answer

    # -- driver ---------------------------------------------------------
    def loop(self) -> StopDecision:
        state = self.state
        pending = list(state.plan.ids)
        while True:
            if self.over_budget():
                return budget_stop(self.ledger.total, self.config.token_budget)
            self.do_execute(pending)
            if self.mode is not RunMode.FULL:
                return StopDecision(StopOutcome.MAX_ITERATIONS, f"{self.mode.value} runs a single pass without verification")
            if self.over_budget():
                return budget_stop(self.ledger.total, self.config.token_budget)
            self.do_verify()
            decision = evaluate_stop(state, self.config)
            if decision.stop:
                return decision
            pending = self.do_replan()
            if pending is None:
                return StopDecision(StopOutcome.DIMINISHING_RETURNS, "replanning produced no corrective actions")
            state.iteration += 1


def run(
    query: str,
    config: OrchestrationConfig,
    registry: BackendRegistry,
    events: EventLog | None = None,
    *,
    mode: RunMode = RunMode.FULL,
    dispatch: Dispatch | None = None,
    executor_config: ExecutorConfig | None = None,
) -> RunReport:
    """Drive one query through the loop and return the report.

    Planner failure (or an invalid plan) and integration-stage synthesis
    failure end the run with status ``failed``; every other backend
    failure degrades inside its phase.
    """
    mode = RunMode(mode)
    dispatch = dispatch or ThreadedDispatch()
    if events is None:
        clock = dispatch.clock if isinstance(dispatch, SimulatedDispatch) else time.time
        events = EventLog(clock)
    r = _Run(query, config, registry, events, mode, dispatch, executor_config)
    events.emit(EventKind.RUN_STARTED, {"query": query, "mode": mode.value, "config": config.to_dict()})

    def fail(exc: Exception) -> RunReport:
        events.emit(
            EventKind.RUN_FINISHED,
            {"status": "failed", "error": f"{exc.__class__.__name__}: {exc}", "total_tokens": r.ledger.total},
        )
        return RunReport("failed", mode, None, r.state, list(events.events), error=str(exc))

    try:
        r.do_plan()
    except Exception as exc:
        return fail(exc)

    try:
        stop = r.loop()
    except VeriplanError as exc:
        return fail(exc)
    state = r.state
    state.stop = stop
    events.emit(EventKind.STOP_TRIGGERED, {**stop.to_dict(), "iteration": state.iteration})

    try:
        answer = r.do_synthesize()
    except BackendError as exc:
        return fail(exc)
    events.emit(EventKind.SYNTHESIS_PRODUCED, {"answer": answer.to_dict(), "hierarchical": answer.hierarchical})

    evaluation: dict[str, VerificationRecord] = {}
    if mode is not RunMode.FULL:
        evaluation = verify_results(state.plan, state.results, {}, registry.verifier)
    report = RunReport("completed", mode, answer, state, [], evaluation=evaluation)
    events.emit(
        EventKind.RUN_FINISHED,
        {
            "status": "completed",
            "total_tokens": r.ledger.total,
            "iterations": state.iteration,
            "verify_cycles": len(state.completeness_history),
            "final_completeness": report.final_completeness,
        },
    )
    report.events = list(events.events)
    return report


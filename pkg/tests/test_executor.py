import math
import random
import threading
import time
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from veriplan.backends.base import BackendRegistry
from veriplan.backends.scripted import AgentScript, AttemptScript
from veriplan.dispatch import SimulatedDispatch, ThreadedDispatch
from veriplan.errors import InvalidPlanError, SchedulingError
from veriplan.events import EventKind, EventLog
from veriplan.executor import (
    CONTEXT_CLOSE,
    CONTEXT_OPEN,
    ExecutorConfig,
    enrich_with_context,
    execute_plan,
    ready_set,
    select_batch,
)
from veriplan.plan import AgentType, ExecutionPlan, SubQuestion
from veriplan.results import AgentResult

from support import max_in_flight, oracle_waves, random_plan, start_groups, topo_violations, uniform_scenario


def sq(i, deps=(), priority=5, ctx=False):
    return SubQuestion(i, f"question {i}", AgentType.RAG, frozenset(deps), priority, ctx)


def simulate(plan, config=ExecutorConfig(), scenario=None, **kw):
    scenario = scenario or uniform_scenario(plan, **kw)
    log = EventLog()
    out = execute_plan(plan, plan.ids, scenario.registry(), config, log, dispatch=SimulatedDispatch())
    return out, log.events


# -- pure helpers ---------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.data())
def test_ready_set_matches_brute_force(seed, data):
    plan = random_plan(random.Random(seed))
    completed = set(data.draw(st.sets(st.sampled_from(plan.ids))))
    expected = set()
    for s in plan.sub_questions:
        if s.id in completed:
            continue
        if all(d in completed for d in s.dependencies):
            expected.add(s.id)
    assert {s.id for s in ready_set(plan, completed)} == expected


def test_select_batch_priority_then_id():
    ready = [sq("b", priority=5), sq("a", priority=5), sq("z", priority=9), sq("c", priority=1)]
    assert [s.id for s in select_batch(ready, 3)] == ["z", "a", "b"]
    assert [s.id for s in select_batch(ready, math.inf)] == ["z", "a", "b", "c"]
    with pytest.raises(ValueError):
        select_batch(ready, 0)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.text("abc", min_size=1, max_size=3), st.integers(1, 10)), unique_by=lambda t: t[0]),
       st.integers(1, 12))
def test_select_batch_is_top_k(items, k):
    ready = [sq(i, priority=p) for i, p in items]
    chosen = select_batch(ready, k)
    assert len(chosen) == min(k, len(ready))
    rest = [s for s in ready if s not in chosen]
    for c in chosen:
        for r in rest:
            assert (-c.priority, c.id) < (-r.priority, r.id)


def test_enrich_block_format_and_order():
    target = sq("t", ["b", "a"], ctx=True)
    deps = {"a": AgentResult("a", "alpha"), "b": AgentResult("b", "beta")}
    prompt = enrich_with_context(target, deps)
    assert prompt == (
        f"{CONTEXT_OPEN.format(id='a')}\nalpha\n{CONTEXT_CLOSE.format(id='a')}\n\n"
        f"{CONTEXT_OPEN.format(id='b')}\nbeta\n{CONTEXT_CLOSE.format(id='b')}\n\n"
        "question t"
    )
    with pytest.raises(SchedulingError):
        enrich_with_context(target, {"a": deps["a"]})


def test_enrich_without_deps_is_question():
    assert enrich_with_context(sq("t"), {}) == "question t"


# -- scheduling -----------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([1, 2, 3, 5, None]))
def test_start_order_is_topological(seed, width):
    rng = random.Random(seed)
    plan = random_plan(rng)
    out, events = simulate(plan, ExecutorConfig(max_concurrent=width), latency_ms=rng.choice([0, 50]), jitter_ms=200, seed=seed)
    assert set(out) == set(plan.ids)
    assert topo_violations(plan, events) == []
    if width is not None:
        assert max_in_flight(events) <= width


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_strict_barrier_waves(seed):
    plan = random_plan(random.Random(seed))
    _, events = simulate(plan, ExecutorConfig(max_concurrent=None, strict_barrier=True), jitter_ms=100, seed=seed)
    assert start_groups(events) == oracle_waves(plan)


def test_strict_barrier_uses_top_k_batches():
    plan = ExecutionPlan(tuple(sq(f"s{i}", priority=i + 1) for i in range(5)))
    _, events = simulate(plan, ExecutorConfig(max_concurrent=2, strict_barrier=True))
    assert start_groups(events) == [{"s4", "s3"}, {"s2", "s1"}, {"s0"}]


def test_slot_refill_starts_as_soon_as_a_slot_frees():
    # a slow and a fast root; the fast one's dependant should not wait for the slow root
    plan = ExecutionPlan((sq("slow"), sq("fast"), sq("next", ["fast"])))
    scenario = uniform_scenario(plan)
    scenario.agents = [
        AgentScript("*", "slow", (AttemptScript("s", tokens=1, latency_ms=1000),)),
        AgentScript("*", "*", (AttemptScript("f", tokens=1, latency_ms=10),)),
    ]
    _, events = simulate(plan, ExecutorConfig(max_concurrent=3), scenario=scenario)
    order = [(e.kind, e.payload["id"]) for e in events]
    assert order.index((EventKind.SUB_QUESTION_STARTED, "next")) < order.index((EventKind.SUB_QUESTION_FINISHED, "slow"))

    _, events = simulate(plan, ExecutorConfig(max_concurrent=3, strict_barrier=True), scenario=scenario)
    order = [(e.kind, e.payload["id"]) for e in events]
    assert order.index((EventKind.SUB_QUESTION_STARTED, "next")) > order.index((EventKind.SUB_QUESTION_FINISHED, "slow"))


def test_context_passed_only_when_requested():
    seen = {}

    class Recorder:
        def run(self, request):
            seen[request.sub_question.id] = request.prompt
            return AgentResult(request.sub_question.id, f"out-{request.sub_question.id}")

    plan = ExecutionPlan((sq("a"), sq("b", ["a"], ctx=True), sq("c", ["a"], ctx=False)))
    reg = BackendRegistry(None, {AgentType.RAG: Recorder()}, None, None, None)
    execute_plan(plan, plan.ids, reg, ExecutorConfig(), dispatch=SimulatedDispatch())
    assert "out-a" in seen["b"] and seen["b"].endswith("question b")
    assert seen["c"] == "question c"


def test_invalid_plan_rejected_before_running():
    plan = ExecutionPlan((sq("a", ["b"]), sq("b", ["a"])))
    with pytest.raises(InvalidPlanError):
        simulate(plan)


def test_retry_pass_uses_prior_results_and_bumps_attempt():
    plan = ExecutionPlan((sq("a"), sq("b", ["a"], ctx=True)))
    reg = uniform_scenario(plan).registry()
    prior = {"a": AgentResult("a", "kept"), "b": AgentResult("b", "", attempt=2)}
    log = EventLog()
    out = execute_plan(plan, ["b"], reg, ExecutorConfig(), log, results=prior, dispatch=SimulatedDispatch())
    assert list(out) == ["b"] and out["b"].attempt == 3
    assert [e.payload["id"] for e in log.of_kind(EventKind.SUB_QUESTION_STARTED)] == ["b"]


# -- failures, timeouts, fallback ---------------------------------------------------

def test_simulated_timeout_marks_failure_and_dependants_still_run():
    plan = ExecutionPlan((sq("a"), sq("b", ["a"], ctx=True)))
    scenario = uniform_scenario(plan, latency_ms=5000)
    out, events = simulate(plan, ExecutorConfig(agent_timeout=1.0), scenario=scenario)
    assert out["a"].failure == "timeout" and out["b"].failure == "timeout"
    assert out["a"].duration == pytest.approx(1.0)


def test_scripted_failure_without_fallback():
    plan = ExecutionPlan((sq("a"),))
    scenario = uniform_scenario(plan)
    scenario.agents = [AgentScript("*", "*", (AttemptScript(fail="rate_limited"),))]
    out, _ = simulate(plan, scenario=scenario)
    assert out["a"].failure == "rate_limited"


def test_fallback_success_is_degraded():
    plan = ExecutionPlan((sq("a"),))
    scenario = uniform_scenario(plan)
    scenario.agents = [AgentScript("*", "*", (AttemptScript(fail="error", tokens=5),))]
    scenario.fallback_agents = [AgentScript("*", "*", (AttemptScript("backup answer", tokens=7),))]
    out, events = simulate(plan, scenario=scenario)
    assert not out["a"].failed and out["a"].degraded
    assert out["a"].content == "backup answer"
    assert events[-1].payload["degraded"] is True


def test_fallback_failure_stays_failed():
    plan = ExecutionPlan((sq("a"),))
    scenario = uniform_scenario(plan)
    scenario.agents = [AgentScript("*", "*", (AttemptScript(fail="error"),))]
    scenario.fallback_agents = [AgentScript("*", "*", (AttemptScript(fail="down"),))]
    out, _ = simulate(plan, scenario=scenario)
    assert out["a"].failure == "down"


def test_limiter_applies_per_execution():
    plan = ExecutionPlan((sq("a"), sq("b")))
    scenario = uniform_scenario(plan)
    calls = tuple(("search", {}) for _ in range(12))
    scenario.agents = [AgentScript("*", "*", (AttemptScript("x", tool_calls=calls),))]
    scenario.tools = ("search",)
    out, _ = simulate(plan, scenario=scenario)
    for r in out.values():
        outcomes = [e.outcome for e in r.tool_trace]
        assert outcomes == ["ok"] * 10 + ["denied:consecutive"] * 2


# -- real threads ---------------------------------------------------------------------

class SleepyAgent:
    def __init__(self, delays, default=0.02):
        self.delays = delays
        self.default = default
        self.live = 0
        self.peak = 0
        self.lock = threading.Lock()

    def run(self, request):
        with self.lock:
            self.live += 1
            self.peak = max(self.peak, self.live)
        try:
            time.sleep(self.delays.get(request.sub_question.id, self.default))
        finally:
            with self.lock:
                self.live -= 1
        return AgentResult(request.sub_question.id, "done", tokens_used=1)


def test_threaded_concurrency_bound_and_order():
    plan = random_plan(random.Random(7), n_max=25)
    agent = SleepyAgent({}, default=0.01)
    reg = BackendRegistry(None, {t: agent for t in AgentType}, None, None, None)
    log = EventLog()
    out = execute_plan(plan, plan.ids, reg, ExecutorConfig(max_concurrent=3), log, dispatch=ThreadedDispatch())
    assert set(out) == set(plan.ids)
    assert agent.peak <= 3
    assert topo_violations(plan, log.events) == []


def test_threaded_timeout_abandons_late_answer():
    plan = ExecutionPlan((sq("slow"), sq("quick")))
    agent = SleepyAgent({"slow": 1.0}, default=0.01)
    reg = BackendRegistry(None, {AgentType.RAG: agent}, None, None, None)
    t0 = time.monotonic()
    out = execute_plan(plan, plan.ids, reg, ExecutorConfig(agent_timeout=0.2), dispatch=ThreadedDispatch())
    assert time.monotonic() - t0 < 0.9
    assert out["slow"].failure == "timeout"
    assert out["quick"].content == "done"


def test_threaded_backend_exception_becomes_failure():
    class Broken:
        def run(self, request):
            raise RuntimeError("boom")

    plan = ExecutionPlan((sq("a"),))
    reg = BackendRegistry(None, {AgentType.RAG: Broken()}, None, None, None)
    out = execute_plan(plan, plan.ids, reg, ExecutorConfig(), dispatch=ThreadedDispatch())
    assert out["a"].failure == "error"


def test_event_sequence_is_gap_free_under_threads():
    plan = ExecutionPlan(tuple(sq(f"s{i}") for i in range(20)))
    agent = SleepyAgent({}, default=0.005)
    reg = BackendRegistry(None, {AgentType.RAG: agent}, None, None, None)
    log = EventLog()
    execute_plan(plan, plan.ids, reg, ExecutorConfig(max_concurrent=None), log, dispatch=ThreadedDispatch())
    assert [e.seq for e in log.events] == list(range(40))
    counts = Counter(e.kind for e in log.events)
    assert counts == {EventKind.SUB_QUESTION_STARTED: 20, EventKind.SUB_QUESTION_FINISHED: 20}

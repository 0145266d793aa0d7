"""Shared builders and independent oracles for the test suite.

The oracles here deliberately avoid the library's own algorithms: waves
come from repeated in-degree-zero removal, stop decisions from exact
fractions, and so on.
"""
from __future__ import annotations

import random
from fractions import Fraction

from veriplan.backends.scripted import AgentScript, AttemptScript, Scenario, VerifierScript
from veriplan.events import EventKind
from veriplan.plan import AgentType, ExecutionPlan, SubQuestion
from veriplan.results import Source

AGENT_TYPES = list(AgentType)


def random_plan(rng: random.Random, n_max: int = 25, density_max: float = 0.3) -> ExecutionPlan:
    n = rng.randint(1, n_max)
    density = rng.uniform(0.0, density_max)
    ids = [f"q{i:02d}" for i in range(n)]
    # edges only point from lower to higher index in a random permutation: acyclic by construction
    order = ids[:]
    rng.shuffle(order)
    sqs = []
    for pos, sq_id in enumerate(order):
        deps = frozenset(d for d in order[:pos] if rng.random() < density)
        sqs.append(
            SubQuestion(
                sq_id,
                f"question {sq_id}",
                rng.choice(AGENT_TYPES),
                deps,
                priority=rng.randint(1, 10),
                context_from_deps=rng.random() < 0.5,
            )
        )
    rng.shuffle(sqs)
    return ExecutionPlan(tuple(sqs), "random")


def oracle_waves(plan: ExecutionPlan) -> list[set[str]]:
    indeg = {sq.id: len(sq.dependencies) for sq in plan.sub_questions}
    children: dict[str, list[str]] = {sq.id: [] for sq in plan.sub_questions}
    for sq in plan.sub_questions:
        for d in sq.dependencies:
            children[d].append(sq.id)
    waves = []
    while indeg:
        wave = {i for i, k in indeg.items() if k == 0}
        assert wave, "cycle"
        for i in wave:
            del indeg[i]
            for c in children[i]:
                indeg[c] -= 1
        waves.append(wave)
    return waves


def topo_violations(plan: ExecutionPlan, events) -> list[tuple[str, str]]:
    """Edges (dep, sq) where sq started before dep's latest finish preceding that start."""
    started: dict[str, int] = {}
    finished: dict[str, int] = {}
    for ev in events:
        if ev.kind is EventKind.SUB_QUESTION_STARTED:
            started[ev.payload["id"]] = ev.seq
        elif ev.kind is EventKind.SUB_QUESTION_FINISHED:
            finished[ev.payload["id"]] = ev.seq
    bad = []
    for sq in plan.sub_questions:
        for d in sq.dependencies:
            if sq.id in started and not (d in finished and finished[d] < started[sq.id]):
                bad.append((d, sq.id))
    return bad


def start_groups(events) -> list[set[str]]:
    """Maximal runs of consecutive start events."""
    groups: list[set[str]] = []
    current: set[str] = set()
    for ev in events:
        if ev.kind is EventKind.SUB_QUESTION_STARTED:
            current.add(ev.payload["id"])
        elif ev.kind is EventKind.SUB_QUESTION_FINISHED and current:
            groups.append(current)
            current = set()
    if current:
        groups.append(current)
    return groups


def max_in_flight(events) -> int:
    live = peak = 0
    for ev in events:
        if ev.kind is EventKind.SUB_QUESTION_STARTED:
            live += 1
            peak = max(peak, live)
        elif ev.kind is EventKind.SUB_QUESTION_FINISHED:
            live -= 1
    return peak


def uniform_scenario(
    plan: ExecutionPlan,
    *,
    latency_ms: float = 0.0,
    tokens: int = 100,
    jitter_ms: float = 0.0,
    seed: int = 0,
    verdict: str = "complete",
) -> Scenario:
    """Every agent answers every question the same way; the verifier says ``verdict``."""
    attempt = AttemptScript(
        content="answer",
        sources=(Source("kb", "doc"),),
        tokens=tokens,
        latency_ms=latency_ms,
    )
    fields = {
        "status": verdict,
        "score": 1.0 if verdict == "complete" else 0.2,
        "confidence": 0.9 if verdict == "complete" else 0.2,
        "recommendation": "accept" if verdict == "complete" else "retry",
        "tokens": 10,
    }
    return Scenario(
        plan=plan,
        agents=[AgentScript("*", "*", (attempt,))],
        verifier=[VerifierScript("*", fields)],
        seed=seed,
        query="q",
        latency_jitter_ms=jitter_ms,
    )


# -- stop-condition oracle over exact fractions ---------------------------------

def oracle_stop(
    tokens: int,
    iteration: int,
    history: list[Fraction],
    confidences: list[Fraction],
    *,
    budget: int = 1_000_000,
    max_iterations: int = 3,
    ready: Fraction = Fraction(8, 10),
    high_conf: Fraction = Fraction(75, 100),
    high_conf_min: Fraction = Fraction(1, 2),
    dim: Fraction = Fraction(5, 100),
) -> str:
    if tokens >= budget:
        return "token_budget"
    if iteration >= max_iterations:
        return "max_iterations"
    ratio = history[-1]
    if ratio >= ready:
        return "ready_for_synthesis"
    conf = sum(confidences, Fraction(0)) / len(confidences) if confidences else Fraction(0)
    if conf >= high_conf and ratio >= high_conf_min:
        return "high_confidence"
    if len(history) >= 2 and ratio - history[-2] < dim:
        return "diminishing_returns"
    return "continue"

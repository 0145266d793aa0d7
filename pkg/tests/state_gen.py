"""Random mid-run orchestration states for persistence tests."""
from __future__ import annotations

import random

from veriplan.backends.ledger import Phase, TokenLedger
from veriplan.orchestrator import OrchestrationState
from veriplan.results import AgentResult, Source, ToolTraceEntry
from veriplan.stopping import StopDecision, StopOutcome
from veriplan.verification import Recommendation, Status, VerificationRecord

from support import random_plan

ALPHABET = "abc xyz\n\"é✓{}[]"


def text(rng: random.Random, n: int = 30) -> str:
    return "".join(rng.choice(ALPHABET) for _ in range(rng.randint(0, n)))


def random_result(rng: random.Random, sq_id: str) -> AgentResult:
    attempt = rng.randint(1, 5)
    sources = tuple(
        Source(text(rng, 5), text(rng, 10), {"page": rng.randint(1, 9)} if rng.random() < 0.3 else None)
        for _ in range(rng.randint(0, 3))
    )
    trace = tuple(ToolTraceEntry(text(rng, 6), rng.choice(["ok", "timeout", "denied:total"]))
                  for _ in range(rng.randint(0, 3)))
    return AgentResult(
        sq_id,
        text(rng),
        sources,
        rng.randint(0, 10**6),
        trace,
        rng.random() * 100,
        attempt,
        tuple(sorted(rng.sample(range(1, attempt), rng.randint(0, attempt - 1)))),
    )


def random_record(rng: random.Random, sq_id: str) -> VerificationRecord:
    status = rng.choice(list(Status))
    recommendation = Recommendation.ACCEPT if status is Status.COMPLETE else rng.choice(list(Recommendation))
    return VerificationRecord(
        sq_id,
        status,
        rng.random(),
        tuple(text(rng, 10) for _ in range(rng.randint(0, 2))),
        tuple(text(rng, 10) for _ in range(rng.randint(0, 2))),
        rng.random(),
        recommendation,
        rng.randint(0, 5000),
    )


def random_state(rng: random.Random) -> OrchestrationState:
    plan = random_plan(rng, n_max=12)
    done = [i for i in plan.ids if rng.random() < 0.7]
    ledger = TokenLedger({p: rng.randint(0, 10**6) for p in Phase})
    stop = None
    if rng.random() < 0.5:
        stop = StopDecision(rng.choice(list(StopOutcome)), text(rng, 20))
    return OrchestrationState(
        query=text(rng, 60),
        plan=plan,
        iteration=rng.randint(0, 3),
        results={i: random_result(rng, i) for i in done},
        records={i: random_record(rng, i) for i in done if rng.random() < 0.8},
        completeness_history=[rng.random() for _ in range(rng.randint(0, 4))],
        ledger=ledger,
        stop=stop,
    )

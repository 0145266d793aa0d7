"""
Plugging in your own backends
=============================

Backends are plain objects with one method per role. This script wires
hand-written ones into a real threaded run:

* a planner that returns a fixed three-step plan,
* agents that call a tool service over HTTP (an in-process server here),
* a flaky primary agent with a fallback that takes over,
* a verifier that wants a number in every answer.

The tool-call limiter sits between agents and the tool service; the
last agent deliberately loops on one tool and gets cut off.
"""
import re

from veriplan import AgentResult, AgentType, ExecutionPlan, OrchestrationConfig, Source, SubQuestion, run
from veriplan.backends import BackendRegistry, ToolServer
from veriplan.backends.scripted import ScriptedReplanner, ScriptedSynthesizer
from veriplan.errors import BackendError
from veriplan.verification import Recommendation, Status, VerificationRecord


class FixedPlanner:
    def plan(self, query, available_agents):
        return ExecutionPlan(
            (
                SubQuestion("prices", "Current list price of the product?", AgentType.WEB_SEARCH, priority=8),
                SubQuestion("costs", "Unit cost from the internal ledger?", AgentType.FINANCIAL, priority=8),
                SubQuestion("margin", "Resulting gross margin?", AgentType.ANALYSIS,
                            frozenset({"prices", "costs"}), context_from_deps=True),
            ),
            "look up both inputs, then compute",
            tokens_used=500,
        )


class LookupAgent:
    """Asks the tool service and reports what came back."""

    def __init__(self, tool):
        self.tool = tool

    def run(self, request):
        reply = request.tools.call(self.tool, {"q": request.sub_question.question})
        if not reply.ok:
            raise BackendError(reply.error, tag="tool")
        return AgentResult(request.sub_question.id, f"{self.tool} says {reply.result['value']}",
                           (Source(self.tool, reply.result["ref"]),), tokens_used=1200)


class FlakyAgent:
    def run(self, request):
        raise BackendError("primary model unavailable", tag="unavailable")


class LoopingAnalyst:
    """Keeps calling the calculator until the limiter stops it."""

    def run(self, request):
        calls = 0
        while request.tools.call("calc", {"expr": "1+1"}).ok:
            calls += 1
        # context blocks arrive in dependency-id order, so look figures up by source
        price = int(re.search(r"web says (\d+)", request.prompt).group(1))
        cost = int(re.search(r"ledger says (\d+)", request.prompt).group(1))
        return AgentResult(request.sub_question.id,
                           f"margin {100 * (price - cost) // price}% after {calls} calculator calls",
                           (Source("calc", "local"),), tokens_used=3000)


class NeedsANumber:
    def verify(self, request):
        ok = bool(re.search(r"\d", request.result.content))
        return VerificationRecord(
            request.sub_question.id,
            Status.COMPLETE if ok else Status.INCOMPLETE,
            1.0 if ok else 0.1,
            () if ok else ("no figure",),
            confidence=0.9 if ok else 0.2,
            recommendation=Recommendation.ACCEPT if ok else Recommendation.RETRY,
            tokens_used=200,
        )


tools = {
    "web": lambda args: {"value": 80, "ref": "https://example.com/product"},
    "ledger": lambda args: {"value": 50, "ref": "ledger/2024/Q3"},
    "calc": lambda args: {"value": 2},
}

with ToolServer(tools) as server:
    print("tool service at", server.endpoint)
    registry = BackendRegistry(
        planner=FixedPlanner(),
        agents={
            AgentType.WEB_SEARCH: LookupAgent("web"),
            AgentType.FINANCIAL: FlakyAgent(),
            AgentType.ANALYSIS: LoopingAnalyst(),
        },
        fallback_agents={AgentType.FINANCIAL: LookupAgent("ledger")},
        verifier=NeedsANumber(),
        replanner=ScriptedReplanner(tokens=300),
        synthesizer=ScriptedSynthesizer(tokens=800),
        tools=server.endpoint,
    )
    report = run("What is our gross margin on the product?", OrchestrationConfig(agent_timeout=30), registry)

print(report.render())

costs = report.state.results["costs"]
print("costs degraded to fallback:", costs.degraded, [f"{e.tool}:{e.outcome}" for e in costs.tool_trace])
trace = report.state.results["margin"].tool_trace
print(f"analyst tool calls: {sum(e.outcome == 'ok' for e in trace)} allowed, first denial: "
      f"{next(e.outcome for e in trace if e.outcome.startswith('denied'))}")

"""Reference adapter that drives every backend role through one text-completion function.

No provider client ships here. Supply ``complete(prompt) -> (text, tokens)``
that wraps whichever model API you use; the adapter builds the prompts,
parses the JSON replies into domain objects and runs a small tool-use
loop for agents (through the request's :class:`ToolSession`, so the
tool-call limiter applies). Not covered by the acceptance suite.
"""
from __future__ import annotations

import json
from typing import Any, Callable

from ..errors import BackendError
from ..plan import AgentType, ExecutionPlan
from ..replanning import ReplanDecision, ReplanRequest
from ..results import AgentResult, Source
from ..synthesis import FinalAnswer, GroupSummary, GroupSummaryRequest, SynthesisRequest
from ..verification import VerificationRecord, VerificationRequest
from .base import AgentRequest, BackendRegistry
from .tools import list_tools

Complete = Callable[[str], "tuple[str, int]"]
MAX_AGENT_STEPS = 60


def extract_json(text: str) -> dict[str, Any]:
    """First JSON object in ``text`` (models like to wrap replies in prose or fences)."""
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            doc, _ = decoder.raw_decode(text, start)
            if isinstance(doc, dict):
                return doc
        except ValueError:
            pass
        start = text.find("{", start + 1)
    raise BackendError("reply contained no JSON object", tag="malformed")


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=1, ensure_ascii=False)


def planner_prompt(query: str, agents: list[AgentType]) -> str:
    return "\n".join([
        "Break the research query below into a small set of atomic sub-questions.",
        f"Available agent types: {', '.join(a.value for a in agents)}.",
        "Reply with JSON: {\"sub_questions\": [{\"id\", \"question\", \"agent_type\", \"dependencies\": [ids],",
        " \"priority\": 1-10, \"context_from_deps\": bool, \"verification_criteria\"}], \"explanation\"}.",
        "Dependencies must form a DAG; independent sub-questions should not depend on each other.",
        "", f"Query: {query}",
    ])


def agent_prompt(request: AgentRequest, tools: list[str]) -> str:
    lines = [
        f"You are the {request.sub_question.agent_type.value} agent. Answer the question below.",
        "Reply with JSON {\"content\": str, \"sources\": [{\"label\", \"locator\"}]} when done.",
    ]
    if tools:
        lines.append(f"To use a tool first, reply {{\"tool\": name, \"arguments\": {{...}}}}. Tools: {', '.join(tools)}.")
    return "\n".join(lines + ["", request.prompt])


def verifier_prompt(request: VerificationRequest) -> str:
    return "\n".join([
        "Judge whether the result fully answers the question.",
        "Reply with JSON: {\"verification_status\": \"complete\"|\"partial\"|\"incomplete\",",
        " \"completeness_score\": 0-1, \"missing_aspects\": [str], \"contradictions\": [str],",
        " \"confidence\": 0-1, \"recommendation\": \"accept\"|\"retry\"|\"escalate\"}.",
        "", f"Question: {request.question}",
        f"Criteria: {request.verification_criteria or '(none given)'}",
        f"Dependency results: {_dump(request.dependency_results)}",
        "", "Result:", request.result.content,
    ])


def replanner_prompt(request: ReplanRequest) -> str:
    incomplete = {i: r.to_dict() for i, r in request.incomplete.items()}
    return "\n".join([
        f"Iteration {request.iteration} of at most {request.max_iterations}. Decide corrective actions.",
        "Every sub-question whose status is incomplete has to be listed for retry.",
        "Reply with JSON: {\"retry_sub_questions\": [ids], \"new_sub_questions\": [...same shape as the plan...],",
        " \"explanation\": str, \"done\": bool}.",
        "", f"Query: {request.query}",
        f"Plan: {_dump(request.plan.to_dict()['sub_questions'])}",
        f"Complete (excerpts): {_dump(request.complete)}",
        f"Not complete: {_dump(incomplete)}",
    ])


def _items(items) -> str:
    return "\n\n".join(
        f"[{it.label}]\n{it.content}\nsources: " + "; ".join(s.citation() for s in it.sources) for it in items
    )


def group_prompt(request: GroupSummaryRequest) -> str:
    return "\n".join([
        f"Summarise these {request.agent_type.value} findings for the query, keeping every citation.",
        "Reply with plain text.", "", f"Query: {request.query}", "", _items(request.items),
    ])


def synthesis_prompt(request: SynthesisRequest) -> str:
    return "\n".join([
        "Write the final answer from the inputs below. Cite only sources that appear in the inputs.",
        "Reply with JSON: {\"answer\": {\"executive_summary\", \"analysis\", \"conclusions\"},",
        " \"key_findings\": [{\"text\", \"citations\": [{\"label\", \"locator\"}]}], \"confidence\": 0-1,",
        " \"gaps\": [str]}.",
        "", f"Query: {request.query}",
        f"Verification: {_dump(request.verification_summary)}",
        f"Known gaps: {_dump(request.gaps)}",
        "", _items(request.items),
    ])


class LLMBackends:
    """Implements every backend protocol on top of ``complete``."""

    def __init__(self, complete: Complete):
        self.complete = complete

    def _ask(self, prompt: str) -> tuple[dict[str, Any], int]:
        text, tokens = self.complete(prompt)
        return extract_json(text), int(tokens)

    def plan(self, query: str, available_agents: list[AgentType]) -> ExecutionPlan:
        doc, tokens = self._ask(planner_prompt(query, available_agents))
        plan = ExecutionPlan.from_dict(doc)
        return ExecutionPlan(plan.sub_questions, plan.explanation, tokens)

    def run(self, request: AgentRequest) -> AgentResult:
        tools = []
        transport = getattr(request.tools, "transport", None)
        if isinstance(transport, dict):
            tools = sorted(transport)
        elif isinstance(transport, str):
            try:
                tools = list_tools(transport)
            except OSError:
                tools = []
        prompt = agent_prompt(request, tools)
        spent = 0
        for _ in range(MAX_AGENT_STEPS):
            doc, tokens = self._ask(prompt)
            spent += tokens
            if "tool" in doc and request.tools is not None:
                reply = request.tools.call(str(doc["tool"]), dict(doc.get("arguments") or {}))
                outcome = reply.result if reply.ok else {"error": reply.error}
                prompt += f"\n\nTool {doc['tool']} returned: {_dump(outcome)}"
                continue
            return AgentResult(
                request.sub_question.id,
                str(doc.get("content", "")),
                tuple(Source.from_dict(s) for s in doc.get("sources", [])),
                spent,
                attempt=request.attempt,
            )
        raise BackendError("agent did not finish within the step limit", tag="step_limit")

    def verify(self, request: VerificationRequest) -> VerificationRecord:
        doc, tokens = self._ask(verifier_prompt(request))
        doc["tokens_used"] = tokens
        return VerificationRecord.from_dict(doc, request.sub_question.id)

    def replan(self, request: ReplanRequest) -> ReplanDecision:
        doc, tokens = self._ask(replanner_prompt(request))
        doc["tokens_used"] = tokens
        return ReplanDecision.from_dict(doc)

    def summarize_group(self, request: GroupSummaryRequest) -> GroupSummary:
        text, tokens = self.complete(group_prompt(request))
        sources = tuple(s for it in request.items for s in it.sources)
        return GroupSummary(request.agent_type, text, sources, int(tokens))

    def synthesize(self, request: SynthesisRequest) -> FinalAnswer:
        doc, tokens = self._ask(synthesis_prompt(request))
        doc["tokens_used"] = tokens
        return FinalAnswer.from_dict(doc)


def llm_registry(complete: Complete, *, fallback: Complete | None = None, tools: Any = None) -> BackendRegistry:
    """A registry with every role (and every agent type) served by ``complete``."""
    main = LLMBackends(complete)
    backup = {t: LLMBackends(fallback) for t in AgentType} if fallback else {}
    return BackendRegistry(
        planner=main,
        agents={t: main for t in AgentType},
        verifier=main,
        replanner=main,
        synthesizer=main,
        fallback_agents=backup,
        tools=tools,
    )

"""Scripted, deterministic backends driven by a scenario document.

Scenario layout (JSON)::

    {
      "seed": 7,
      "query": "...",                      # optional default query
      "plan": {"sub_questions": [...], "explanation": "..."},
      "planner_tokens": 8000,
      "agents": [{"agent_type": "rag", "match": "sq_001",
                  "attempts": [{"content": "...", "sources": [...], "tokens": 1000,
                                "latency_ms": 300, "fail": null,
                                "tool_calls": [{"tool": "search", "arguments": {}}]}]}],
      "fallback_agents": [...],            # same shape, optional
      "verifier": [{"match": "FULL", "status": "complete", "score": 1.0,
                    "confidence": 0.9, "recommendation": "accept",
                    "missing_aspects": [], "tokens": 500}],
      "replanner": {"tokens": 2000, "decisions": [{"iteration": 0, ...}]},
      "synthesizer": {"tokens": 6000, "group_tokens": 2000},
      "latency_jitter_ms": 0,
      "tools": ["kb_search"]               # local echo tools for tool_calls
    }

Agent entry lookup for a sub-question: exact id match, then substring
match on the question text, then the ``"*"`` default entry; entries for
the specific agent type are tried before ``"agent_type": "*"`` entries.
The n-th execution of a sub-question uses the n-th attempt (the last
attempt repeats). Verifier entries are tried in listed order against the
result content, with ``"*"`` as the default.
"""
from __future__ import annotations

import json
import random
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import BackendError, ScenarioError
from ..plan import AgentType, ExecutionPlan
from ..replanning import ReplanDecision, ReplanRequest
from ..results import AgentResult, Source
from ..synthesis import FinalAnswer, GroupSummary, GroupSummaryRequest, KeyFinding, SynthesisRequest
from ..verification import VerificationRecord, VerificationRequest
from .base import AgentRequest, BackendRegistry

DEFAULT = "*"


@dataclass(frozen=True)
class AttemptScript:
    content: str = ""
    sources: tuple[Source, ...] = ()
    tokens: int = 0
    latency_ms: float = 0.0
    fail: str | None = None
    tool_calls: tuple[tuple[str, dict], ...] = ()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AttemptScript":
        calls = tuple((c["tool"], dict(c.get("arguments") or {})) for c in data.get("tool_calls", []))
        fail = data.get("fail")
        return cls(
            content=str(data.get("content", "")),
            sources=tuple(Source.from_dict(s) for s in data.get("sources", [])),
            tokens=int(data.get("tokens", 0)),
            latency_ms=float(data.get("latency_ms", 0.0)),
            fail=(fail if isinstance(fail, str) else "error") if fail else None,
            tool_calls=calls,
        )


@dataclass(frozen=True)
class AgentScript:
    agent_type: str  # agent type value or "*"
    match: str
    attempts: tuple[AttemptScript, ...]

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AgentScript":
        agent_type = data.get("agent_type", DEFAULT)
        if agent_type != DEFAULT:
            agent_type = AgentType.parse(agent_type).value
        attempts = tuple(AttemptScript.from_dict(a) for a in data.get("attempts", []))
        if not attempts:
            raise ScenarioError(f"agent script {agent_type}/{data.get('match')} has no attempts")
        return cls(agent_type, str(data.get("match", DEFAULT)), attempts)


def _pick(scripts: list[AgentScript], sq_id: str, question: str) -> AgentScript | None:
    for test in (
        lambda s: s.match == sq_id,
        lambda s: s.match != DEFAULT and s.match in question,
        lambda s: s.match == DEFAULT,
    ):
        for s in scripts:
            if test(s):
                return s
    return None


class ScriptedAgent:
    """Replays scripted attempts; ``realtime`` makes it actually sleep."""

    def __init__(self, scripts: list[AgentScript], *, seed: int = 0, jitter_ms: float = 0.0, realtime: bool = False):
        # type-specific entries take precedence over wildcard ones
        self.scripts = sorted(scripts, key=lambda s: s.agent_type == DEFAULT)
        self.seed = seed
        self.jitter_ms = jitter_ms
        self.realtime = realtime

    def script_for(self, request: AgentRequest) -> AttemptScript:
        sq = request.sub_question
        script = _pick(self.scripts, sq.id, sq.question)
        if script is None:
            raise ScenarioError(f"no agent script matches {sq.id} and no default entry exists")
        return script.attempts[min(request.attempt, len(script.attempts)) - 1]

    def run(self, request: AgentRequest) -> AgentResult:
        attempt = self.script_for(request)
        sq_id = request.sub_question.id
        latency = attempt.latency_ms
        if self.jitter_ms:
            rng = random.Random(f"{self.seed}:{sq_id}:{request.attempt}")
            latency += rng.uniform(0.0, self.jitter_ms)
        if self.realtime and latency:
            time.sleep(latency / 1000.0)
        if request.tools is not None:
            for tool, args in attempt.tool_calls:
                request.tools.call(tool, args)
        if attempt.fail:
            raise BackendError(f"scripted failure for {sq_id}", tag=attempt.fail)
        return AgentResult(
            sub_question_id=sq_id,
            content=attempt.content,
            sources=attempt.sources,
            tokens_used=attempt.tokens,
            duration=latency / 1000.0,
            attempt=request.attempt,
        )


class ScriptedPlanner:
    def __init__(self, plan: ExecutionPlan, tokens: int = 0):
        self._plan = plan
        self.tokens = tokens

    def plan(self, query: str, available_agents: list[AgentType]) -> ExecutionPlan:
        return ExecutionPlan(self._plan.sub_questions, self._plan.explanation, self.tokens)


@dataclass(frozen=True)
class VerifierScript:
    match: str
    fields: dict[str, Any]


class ScriptedVerifier:
    def __init__(self, scripts: list[VerifierScript]):
        self.scripts = scripts
        self.calls: list[str] = []

    def verify(self, request: VerificationRequest) -> VerificationRecord:
        content = request.result.content
        self.calls.append(request.sub_question.id)
        chosen = next((s for s in self.scripts if s.match != DEFAULT and s.match in content), None)
        if chosen is None:
            chosen = next((s for s in self.scripts if s.match == DEFAULT), None)
        if chosen is None:
            raise BackendError(f"no verifier script matches {request.sub_question.id}")
        return VerificationRecord.from_dict(chosen.fields, request.sub_question.id)


class ScriptedReplanner:
    """Per-iteration overrides; otherwise retries everything not complete."""

    def __init__(self, decisions: dict[int, dict[str, Any]] | None = None, tokens: int = 0):
        self.decisions = dict(decisions or {})
        self.tokens = tokens

    def replan(self, request: ReplanRequest) -> ReplanDecision:
        override = self.decisions.get(request.iteration)
        if override is not None:
            return ReplanDecision.from_dict({**override, "tokens_used": self.tokens})
        retry = [i for i in request.plan.ids if i in request.incomplete]
        return ReplanDecision(tuple(retry), (), "retry every sub-question not yet complete", False, self.tokens)


_HEADER = re.compile(r"^### Attempt .*$", re.MULTILINE)


def _lead(text: str, limit: int = 240) -> str:
    # merged results: summarise the most recent attempt that said anything
    sections = [part for part in _HEADER.split(text) if part.strip()] or [text]
    body = " ".join(sections[-1].split())
    sentence = re.split(r"(?<=[.!?])\s", body, maxsplit=1)[0]
    return sentence[:limit]


class ScriptedSynthesizer:
    """Builds answers mechanically from its inputs (one finding per input)."""

    def __init__(self, tokens: int = 0, group_tokens: int = 0):
        self.tokens = tokens
        self.group_tokens = group_tokens
        self.group_calls = 0
        self.final_calls = 0

    def summarize_group(self, request: GroupSummaryRequest) -> GroupSummary:
        self.group_calls += 1
        lines = [f"{it.label}: {_lead(it.content)}" for it in request.items]
        sources: list[Source] = []
        for it in request.items:
            sources.extend(s for s in it.sources if s not in sources)
        return GroupSummary(request.agent_type, "\n".join(lines), tuple(sources), self.group_tokens)

    def synthesize(self, request: SynthesisRequest) -> FinalAnswer:
        self.final_calls += 1
        findings = [KeyFinding(_lead(it.content) or it.label, tuple(it.sources)) for it in request.items if it.sources]
        complete = sum(1 for v in request.verification_summary.values() if v == "complete")
        total = len(request.verification_summary)
        return FinalAnswer(
            executive_summary=f"{request.query} Answer assembled from {len(request.items)} inputs.",
            key_findings=tuple(findings[:8]),
            analysis="\n\n".join(f"{it.label}: {_lead(it.content, 600)}" for it in request.items),
            conclusions=f"{complete} of {total} sub-questions verified complete; {len(request.gaps)} gap(s) remain.",
            confidence=None,
            sources=(),
            gaps=(),
            tokens_used=self.tokens,
        )


@dataclass
class Scenario:
    plan: ExecutionPlan
    agents: list[AgentScript]
    verifier: list[VerifierScript]
    seed: int = 0
    query: str = ""
    planner_tokens: int = 0
    fallback_agents: list[AgentScript] = field(default_factory=list)
    replanner: dict[int, dict[str, Any]] = field(default_factory=dict)
    replanner_tokens: int = 0
    synthesizer_tokens: int = 0
    group_tokens: int = 0
    latency_jitter_ms: float = 0.0
    # names of local echo tools available to scripted tool calls
    tools: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Scenario":
        try:
            plan = ExecutionPlan.from_dict(data["plan"])
            agents = [AgentScript.from_dict(a) for a in data["agents"]]
            verifier = [
                VerifierScript(str(v.get("match", DEFAULT)), {k: x for k, x in v.items() if k != "match"})
                for v in data["verifier"]
            ]
            rp = data.get("replanner") or {}
            if isinstance(rp, list):
                rp = {"decisions": rp}
            decisions = {int(d["iteration"]): {k: x for k, x in d.items() if k != "iteration"} for d in rp.get("decisions", [])}
            syn = data.get("synthesizer") or {}
            return cls(
                plan=plan,
                agents=agents,
                verifier=verifier,
                seed=int(data.get("seed", 0)),
                query=str(data.get("query", "")),
                planner_tokens=int(data.get("planner_tokens", 0)),
                fallback_agents=[AgentScript.from_dict(a) for a in data.get("fallback_agents", [])],
                replanner=decisions,
                replanner_tokens=int(rp.get("tokens", 0)),
                synthesizer_tokens=int(syn.get("tokens", 0)),
                group_tokens=int(syn.get("group_tokens", 0)),
                latency_jitter_ms=float(data.get("latency_jitter_ms", 0.0)),
                tools=tuple(data.get("tools", ())),
            )
        except ScenarioError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"malformed scenario: {exc!r}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
        try:
            return cls.from_dict(json.loads(text))
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"scenario {path} is not valid JSON: {exc}") from exc

    def _agent_map(self, scripts: list[AgentScript], realtime: bool) -> dict[AgentType, ScriptedAgent]:
        wildcard = [s for s in scripts if s.agent_type == DEFAULT]
        out = {}
        for agent_type in AgentType:
            own = [s for s in scripts if s.agent_type == agent_type.value]
            if own or wildcard:
                out[agent_type] = ScriptedAgent(
                    own + wildcard, seed=self.seed, jitter_ms=self.latency_jitter_ms, realtime=realtime
                )
        return out

    def local_tools(self) -> dict[str, Any] | None:
        if not self.tools:
            return None
        return {name: (lambda args, _n=name: {"tool": _n, "echo": args}) for name in self.tools}

    def registry(self, *, realtime: bool = False, tools: Any = None) -> BackendRegistry:
        return BackendRegistry(
            planner=ScriptedPlanner(self.plan, self.planner_tokens),
            agents=self._agent_map(self.agents, realtime),
            verifier=ScriptedVerifier(self.verifier),
            replanner=ScriptedReplanner(self.replanner, self.replanner_tokens),
            synthesizer=ScriptedSynthesizer(self.synthesizer_tokens, self.group_tokens),
            fallback_agents=self._agent_map(self.fallback_agents, realtime),
            tools=tools if tools is not None else self.local_tools(),
        )

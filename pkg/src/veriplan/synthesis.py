"""Final-answer synthesis, direct or hierarchical (group by agent type first)."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from .errors import BackendError, SchedulingError
from .plan import AgentType, ExecutionPlan
from .results import AgentResult, Source, dedup_sources
from .verification import VerificationRecord, mean_confidence

HIERARCHICAL_CHAR_LIMIT = 15_000
HIERARCHICAL_RESULT_COUNT = 10
FALLBACK_EXCERPT_CHARS = 400


@dataclass(frozen=True)
class KeyFinding:
    text: str
    citations: tuple[Source, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"text": self.text, "citations": [s.to_dict() for s in self.citations]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "KeyFinding":
        return cls(str(data["text"]), tuple(Source.from_dict(s) for s in data.get("citations", [])))


@dataclass(frozen=True)
class FinalAnswer:
    executive_summary: str
    key_findings: tuple[KeyFinding, ...] = ()
    analysis: str = ""
    conclusions: str = ""
    confidence: float | None = None
    sources: tuple[Source, ...] = ()
    gaps: tuple[str, ...] = ()
    tokens_used: int = 0
    hierarchical: bool = False

    def render(self) -> str:
        lines = ["## Executive Summary", self.executive_summary, "", "## Key Findings"]
        for kf in self.key_findings:
            lines.append(f"- {kf.text} " + " ".join(c.citation() for c in kf.citations))
        lines += ["", "## Analysis", self.analysis, "", "## Conclusions", self.conclusions]
        if self.confidence is not None:
            lines.append(f"Confidence: {self.confidence:.2f}")
        if self.gaps:
            lines += ["", "## Gaps"] + [f"- {g}" for g in self.gaps]
        lines += ["", "## Sources"] + [f"- {s.citation()}" for s in self.sources]
        return "\n".join(lines)

    def to_dict(self) -> dict[str, Any]:
        return {
            "answer": {
                "executive_summary": self.executive_summary,
                "analysis": self.analysis,
                "conclusions": self.conclusions,
            },
            "key_findings": [kf.to_dict() for kf in self.key_findings],
            "confidence": self.confidence,
            "sources": [s.to_dict() for s in self.sources],
            "gaps": list(self.gaps),
            "tokens_used": self.tokens_used,
            "hierarchical": self.hierarchical,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FinalAnswer":
        answer = data.get("answer") or {}
        if isinstance(answer, str):
            answer = {"executive_summary": answer}
        conf = data.get("confidence")
        return cls(
            executive_summary=str(answer.get("executive_summary", "")),
            key_findings=tuple(KeyFinding.from_dict(k) for k in data.get("key_findings", [])),
            analysis=str(answer.get("analysis", "")),
            conclusions=str(answer.get("conclusions", "")),
            confidence=None if conf is None else float(conf),
            sources=tuple(Source.from_dict(s) for s in data.get("sources", [])),
            gaps=tuple(data.get("gaps", [])),
            tokens_used=int(data.get("tokens_used", 0)),
            hierarchical=bool(data.get("hierarchical", False)),
        )


@dataclass
class SynthesisItem:
    label: str
    content: str
    sources: tuple[Source, ...] = ()


@dataclass
class GroupSummaryRequest:
    query: str
    agent_type: AgentType
    items: list[SynthesisItem]


@dataclass(frozen=True)
class GroupSummary:
    agent_type: AgentType
    content: str
    sources: tuple[Source, ...] = ()
    tokens_used: int = 0
    fallback: bool = False


@dataclass
class SynthesisRequest:
    query: str
    items: list[SynthesisItem]
    # id -> verification status value
    verification_summary: dict[str, str] = field(default_factory=dict)
    gaps: list[str] = field(default_factory=list)


def needs_hierarchical(results: Mapping[str, AgentResult]) -> bool:
    chars = sum(len(r.content) for r in results.values())
    return chars > HIERARCHICAL_CHAR_LIMIT or len(results) >= HIERARCHICAL_RESULT_COUNT


def group_by_agent_type(
    plan: ExecutionPlan, results: Mapping[str, AgentResult]
) -> dict[AgentType, list[AgentResult]]:
    """Partition results by their sub-question's agent type.

    Groups are keyed in agent-type enumeration order; members keep plan order.
    """
    by_id = plan.by_id()
    unknown = sorted(set(results) - by_id.keys())
    if unknown:
        raise SchedulingError(f"results for ids not in plan: {unknown}")
    groups: dict[AgentType, list[AgentResult]] = {}
    for agent_type in AgentType:
        members = [results[sq.id] for sq in plan.sub_questions if sq.id in results and sq.agent_type is agent_type]
        if members:
            groups[agent_type] = members
    return groups


def _item(plan: ExecutionPlan, result: AgentResult) -> SynthesisItem:
    question = plan.get(result.sub_question_id).question
    return SynthesisItem(f"{result.sub_question_id}: {question}", result.content, tuple(result.sources))


def _fallback_summary(agent_type: AgentType, items: list[SynthesisItem]) -> GroupSummary:
    text = "\n\n".join(f"{it.label}\n{it.content[:FALLBACK_EXCERPT_CHARS]}" for it in items)
    return GroupSummary(agent_type, text, tuple(dedup_sources(*(it.sources for it in items))), 0, fallback=True)


def collect_gaps(
    plan: ExecutionPlan, results: Mapping[str, AgentResult], records: Mapping[str, VerificationRecord]
) -> list[str]:
    gaps = []
    for sq in plan.sub_questions:
        rec = records.get(sq.id)
        res = results.get(sq.id)
        if rec is not None and not rec.complete:
            missing = "; ".join(rec.missing_aspects) or "incomplete"
            gaps.append(f"{sq.id} ({rec.status.value}): {missing}")
        elif rec is None and (res is None or res.failed):
            gaps.append(f"{sq.id}: no usable result")
        elif rec is None:
            gaps.append(f"{sq.id}: unverified")
    return gaps


def synthesize(
    query: str,
    plan: ExecutionPlan,
    results: Mapping[str, AgentResult],
    records: Mapping[str, VerificationRecord],
    backend,
    *,
    max_workers: int = 1,
) -> FinalAnswer:
    """Produce the final answer and enforce its attribution invariants.

    Findings may only cite sources that some result actually returned;
    findings left without a citation are dropped. Every id not verified
    complete is reported in ``gaps``.
    """
    if not results:
        raise ValueError("synthesize needs at least one result")
    gaps = collect_gaps(plan, results, records)
    summary = {i: r.status.value for i, r in records.items()}
    allowed = dedup_sources(*(results[sq.id].sources for sq in plan.sub_questions if sq.id in results))
    tokens = 0
    hierarchical = needs_hierarchical(results)

    if hierarchical:
        groups = group_by_agent_type(plan, results)
        requests = [
            GroupSummaryRequest(query, agent_type, [_item(plan, r) for r in members])
            for agent_type, members in groups.items()
        ]

        def run_group(req: GroupSummaryRequest) -> GroupSummary:
            try:
                out = backend.summarize_group(req)
                if not isinstance(out, GroupSummary):
                    raise BackendError("group summary of wrong type")
                return out
            except Exception:
                return _fallback_summary(req.agent_type, req.items)

        if max_workers > 1 and len(requests) > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                summaries = list(pool.map(run_group, requests))
        else:
            summaries = [run_group(r) for r in requests]
        tokens += sum(s.tokens_used for s in summaries)
        items = [SynthesisItem(s.agent_type.value, s.content, tuple(s.sources)) for s in summaries]
    else:
        items = [_item(plan, results[sq.id]) for sq in plan.sub_questions if sq.id in results]

    try:
        answer = backend.synthesize(SynthesisRequest(query, items, summary, list(gaps)))
        if isinstance(answer, Mapping):
            answer = FinalAnswer.from_dict(answer)
    except Exception as exc:
        raise BackendError(f"synthesis failed: {exc}") from exc

    allowed_keys = {s.key for s in allowed}
    findings = []
    for kf in answer.key_findings:
        cites = tuple(dedup_sources([c for c in kf.citations if c.key in allowed_keys]))
        if cites:
            findings.append(KeyFinding(kf.text, cites))
    merged_gaps = tuple(dict.fromkeys(list(answer.gaps) + gaps))
    confidence = answer.confidence if answer.confidence is not None else mean_confidence(records)
    return replace(
        answer,
        key_findings=tuple(findings),
        confidence=min(1.0, max(0.0, confidence)),
        sources=tuple(allowed),
        gaps=merged_gaps,
        tokens_used=tokens + answer.tokens_used,
        hierarchical=hierarchical,
    )

"""Completeness verification of execution results."""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from .plan import ExecutionPlan, SubQuestion
from .results import AgentResult


class Status(enum.Enum):
    COMPLETE = "complete"
    PARTIAL = "partial"
    INCOMPLETE = "incomplete"


class Recommendation(enum.Enum):
    ACCEPT = "accept"
    RETRY = "retry"
    ESCALATE = "escalate"


@dataclass(frozen=True)
class VerificationRecord:
    sub_question_id: str
    status: Status
    completeness_score: float
    missing_aspects: tuple[str, ...] = ()
    contradictions: tuple[str, ...] = ()
    confidence: float = 0.0
    recommendation: Recommendation = Recommendation.RETRY
    tokens_used: int = 0

    def __post_init__(self):
        object.__setattr__(self, "status", Status(self.status))
        object.__setattr__(self, "recommendation", Recommendation(self.recommendation))
        object.__setattr__(self, "missing_aspects", tuple(self.missing_aspects))
        object.__setattr__(self, "contradictions", tuple(self.contradictions))
        for name in ("completeness_score", "confidence"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0) or math.isnan(value):
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.status is Status.COMPLETE and self.recommendation is not Recommendation.ACCEPT:
            raise ValueError("a complete record must recommend accept")

    @property
    def complete(self) -> bool:
        return self.status is Status.COMPLETE

    def to_dict(self) -> dict[str, Any]:
        return {
            "sub_question_id": self.sub_question_id,
            "verification_status": self.status.value,
            "completeness_score": self.completeness_score,
            "missing_aspects": list(self.missing_aspects),
            "contradictions": list(self.contradictions),
            "confidence": self.confidence,
            "recommendation": self.recommendation.value,
            "tokens_used": self.tokens_used,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], sub_question_id: str | None = None) -> "VerificationRecord":
        status = data.get("verification_status", data.get("status"))
        return cls(
            sub_question_id=sub_question_id or data["sub_question_id"],
            status=Status(str(status).lower()),
            completeness_score=float(data.get("completeness_score", data.get("score", 0.0))),
            missing_aspects=tuple(data.get("missing_aspects") or ()),
            contradictions=tuple(data.get("contradictions") or ()),
            confidence=float(data.get("confidence", 0.0)),
            recommendation=Recommendation(str(data.get("recommendation", "retry")).lower()),
            tokens_used=int(data.get("tokens_used", data.get("tokens", 0))),
        )


def synthetic_incomplete(sub_question_id: str, reason: str) -> VerificationRecord:
    return VerificationRecord(
        sub_question_id,
        Status.INCOMPLETE,
        0.0,
        missing_aspects=(reason,),
        confidence=0.0,
        recommendation=Recommendation.RETRY,
    )


@dataclass
class VerificationRequest:
    sub_question: SubQuestion
    result: AgentResult
    dependency_results: dict[str, str] = field(default_factory=dict)

    @property
    def question(self) -> str:
        return self.sub_question.question

    @property
    def verification_criteria(self) -> str:
        return self.sub_question.verification_criteria


def _verify_one(backend, request: VerificationRequest) -> VerificationRecord:
    sq_id = request.sub_question.id
    if request.result.failed:
        return synthetic_incomplete(sq_id, f"execution failed ({request.result.failure})")
    try:
        record = backend.verify(request)
        if not isinstance(record, VerificationRecord):
            record = VerificationRecord.from_dict(record, sq_id)
    except Exception as exc:
        return synthetic_incomplete(sq_id, f"verifier failure: {exc}")
    if record.sub_question_id != sq_id:
        record = replace(record, sub_question_id=sq_id)
    return record


def verify_results(
    plan: ExecutionPlan,
    results: Mapping[str, AgentResult],
    prior: Mapping[str, VerificationRecord],
    backend,
    *,
    max_workers: int = 1,
) -> dict[str, VerificationRecord]:
    """Verify every result, reusing records that are already complete.

    Failure-marked results and backend errors yield a synthetic
    incomplete/retry record instead of raising. Output is keyed in plan
    order.
    """
    requests = []
    out: dict[str, VerificationRecord] = {}
    for sq in plan.sub_questions:
        if sq.id not in results:
            continue
        old = prior.get(sq.id)
        if old is not None and old.complete:
            out[sq.id] = old
            continue
        deps = {d: results[d].content for d in sorted(sq.dependencies) if d in results}
        requests.append(VerificationRequest(sq, results[sq.id], deps))
        out[sq.id] = None  # placeholder keeps plan order

    if max_workers > 1 and len(requests) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            fresh = list(pool.map(lambda r: _verify_one(backend, r), requests))
    else:
        fresh = [_verify_one(backend, r) for r in requests]
    for record in fresh:
        out[record.sub_question_id] = record
    return out


def completeness_ratio(records: Mapping[str, VerificationRecord]) -> float:
    if not records:
        return 0.0
    return sum(1 for r in records.values() if r.complete) / len(records)


def mean_confidence(records: Mapping[str, VerificationRecord]) -> float:
    if not records:
        return 0.0
    return math.fsum(r.confidence for r in records.values()) / len(records)


def mean_score(records: Mapping[str, VerificationRecord]) -> float:
    if not records:
        return 0.0
    return math.fsum(r.completeness_score for r in records.values()) / len(records)

"""Sub-question / execution-plan data model and graph analysis.

A plan is a DAG: each :class:`SubQuestion` names the ids it depends on.
:func:`validate_plan` reports every structural problem as data, and
:func:`wave_decomposition` layers a valid plan into waves of mutually
independent sub-questions.
"""
from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

from .errors import InvalidPlanError

DEFAULT_PRIORITY = 5
MIN_PRIORITY, MAX_PRIORITY = 1, 10


class Tier(enum.Enum):
    DATA_GATHERING = "data_gathering"
    ANALYSIS = "analysis"
    OUTPUT = "output"


class AgentType(enum.Enum):
    # declaration order is the canonical enumeration order (used for grouping)
    RAG = "rag"
    WEB_SEARCH = "web_search"
    FINANCIAL = "financial"
    COMPETITOR = "competitor"
    ANALYSIS = "analysis"
    REASONING = "reasoning"
    RAW_DATA = "raw_data"
    DOCUMENT = "document"
    VISUALIZATION = "visualization"

    @property
    def tier(self) -> Tier:
        return _TIERS[self]

    @classmethod
    def parse(cls, value: "str | AgentType") -> "AgentType":
        if isinstance(value, AgentType):
            return value
        key = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown agent type {value!r}") from None


_TIERS = {
    AgentType.RAG: Tier.DATA_GATHERING,
    AgentType.WEB_SEARCH: Tier.DATA_GATHERING,
    AgentType.FINANCIAL: Tier.DATA_GATHERING,
    AgentType.COMPETITOR: Tier.DATA_GATHERING,
    AgentType.ANALYSIS: Tier.ANALYSIS,
    AgentType.REASONING: Tier.ANALYSIS,
    AgentType.RAW_DATA: Tier.ANALYSIS,
    AgentType.DOCUMENT: Tier.OUTPUT,
    AgentType.VISUALIZATION: Tier.OUTPUT,
}


@dataclass(frozen=True)
class SubQuestion:
    """One node of the plan.

    Field values are not range-checked on construction; plans arrive from
    external planners and :func:`validate_plan` reports problems instead.
    Duplicate dependency entries collapse into a set.
    """

    id: str
    question: str
    agent_type: AgentType
    dependencies: frozenset[str] = frozenset()
    priority: int = DEFAULT_PRIORITY
    context_from_deps: bool = False
    verification_criteria: str = ""

    def __post_init__(self):
        object.__setattr__(self, "agent_type", AgentType.parse(self.agent_type))
        object.__setattr__(self, "dependencies", frozenset(self.dependencies))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "question": self.question,
            "agent_type": self.agent_type.value,
            "dependencies": sorted(self.dependencies),
            "priority": self.priority,
            "context_from_deps": self.context_from_deps,
            "verification_criteria": self.verification_criteria,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SubQuestion":
        return cls(
            id=str(data["id"]),
            question=str(data.get("question", "")),
            agent_type=AgentType.parse(data["agent_type"]),
            dependencies=frozenset(str(d) for d in data.get("dependencies") or ()),
            priority=int(data.get("priority", DEFAULT_PRIORITY)),
            context_from_deps=bool(data.get("context_from_deps", False)),
            verification_criteria=str(data.get("verification_criteria", "")),
        )


@dataclass(frozen=True)
class ExecutionPlan:
    sub_questions: tuple[SubQuestion, ...]
    explanation: str = ""
    # usage reported by the planner backend that produced this plan
    tokens_used: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sub_questions", tuple(self.sub_questions))

    @property
    def ids(self) -> list[str]:
        return [sq.id for sq in self.sub_questions]

    def __len__(self) -> int:
        return len(self.sub_questions)

    def __iter__(self):
        return iter(self.sub_questions)

    def get(self, sq_id: str) -> SubQuestion:
        for sq in self.sub_questions:
            if sq.id == sq_id:
                return sq
        raise KeyError(sq_id)

    def by_id(self) -> dict[str, SubQuestion]:
        return {sq.id: sq for sq in self.sub_questions}

    def extended(self, new: Iterable[SubQuestion]) -> "ExecutionPlan":
        return ExecutionPlan(self.sub_questions + tuple(new), self.explanation, self.tokens_used)

    def to_dict(self) -> dict[str, Any]:
        return {
            "sub_questions": [sq.to_dict() for sq in self.sub_questions],
            "explanation": self.explanation,
            "tokens_used": self.tokens_used,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExecutionPlan":
        return cls(
            tuple(SubQuestion.from_dict(d) for d in data.get("sub_questions", [])),
            explanation=str(data.get("explanation", "")),
            tokens_used=int(data.get("tokens_used", 0)),
        )

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "ExecutionPlan":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "ExecutionPlan":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class Violation:
    kind: str
    ids: tuple[str, ...]
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(f"{v.kind}: {v.message}" for v in self.violations)


def _strongly_connected(graph: dict[str, set[str]]) -> list[list[str]]:
    """Iterative Tarjan; returns components in discovery order."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    out: list[list[str]] = []
    counter = 0
    for root in sorted(graph):
        if root in index:
            continue
        work = [(root, iter(sorted(graph[root])))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, children = work[-1]
            advanced = False
            for child in children:
                if child not in graph:
                    continue
                if child not in index:
                    index[child] = low[child] = counter
                    counter += 1
                    stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter(sorted(graph[child]))))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp.append(member)
                    if member == node:
                        break
                out.append(comp)
    return out


def validate_plan(plan: ExecutionPlan) -> ValidationReport:
    """Check every plan invariant and enumerate all violations found."""
    violations: list[Violation] = []
    sqs = plan.sub_questions
    if not sqs:
        return ValidationReport((Violation("empty_plan", (), "plan has no sub-questions"),))

    counts = Counter(sq.id for sq in sqs)
    for sq_id in sorted(i for i, n in counts.items() if n > 1):
        violations.append(Violation("duplicate_id", (sq_id,), f"id {sq_id!r} appears {counts[sq_id]} times"))

    known = set(counts)
    for sq in sorted(sqs, key=lambda s: (s.id, s.question)):
        if not sq.id:
            violations.append(Violation("empty_id", ("",), "sub-question with empty id"))
        if not sq.question.strip():
            violations.append(Violation("empty_question", (sq.id,), f"{sq.id}: question text is empty"))
        if not (MIN_PRIORITY <= sq.priority <= MAX_PRIORITY):
            violations.append(
                Violation("priority_range", (sq.id,), f"{sq.id}: priority {sq.priority} outside [1, 10]")
            )
        if sq.id in sq.dependencies:
            violations.append(Violation("self_dependency", (sq.id,), f"{sq.id} depends on itself"))
        for dep in sorted(sq.dependencies - known):
            violations.append(
                Violation("dangling_dependency", (sq.id, dep), f"dangling reference {sq.id}->{dep}")
            )

    graph: dict[str, set[str]] = {i: set() for i in known}
    for sq in sqs:
        graph[sq.id] |= {d for d in sq.dependencies if d in known and d != sq.id}
    cycles = [sorted(c) for c in _strongly_connected(graph) if len(c) > 1]
    for members in sorted(cycles):
        violations.append(
            Violation("cycle", tuple(members), "cycle among {" + ", ".join(members) + "}")
        )
    return ValidationReport(tuple(violations))


def wave_decomposition(plan: ExecutionPlan) -> list[set[str]]:
    """Layer a valid plan by longest dependency chain from a root."""
    report = validate_plan(plan)
    if not report.ok:
        raise InvalidPlanError(report)
    deps = {sq.id: sq.dependencies for sq in plan.sub_questions}
    depth: dict[str, int] = {}

    def level(node: str) -> int:
        # explicit stack keeps deep chains clear of the recursion limit
        stack = [node]
        while stack:
            cur = stack[-1]
            pending = [d for d in deps[cur] if d not in depth]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            depth[cur] = 1 + max((depth[d] for d in deps[cur]), default=-1)
        return depth[node]

    waves: list[set[str]] = []
    for sq_id in deps:
        d = level(sq_id)
        while len(waves) <= d:
            waves.append(set())
        waves[d].add(sq_id)
    return waves

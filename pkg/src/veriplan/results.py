"""Agent results, source attributions and tool-trace entries."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

# reserved pseudo-tool names used in tool_trace
EXECUTION_MARKER = "__execution__"
FALLBACK_MARKER = "__fallback__"
FAILED_PREFIX = "failed:"


@dataclass(frozen=True)
class Source:
    label: str
    locator: str
    metadata: dict[str, Any] | None = None

    @property
    def key(self) -> tuple[str, str]:
        return (self.label, self.locator)

    def citation(self) -> str:
        """Render as ``[source - section/URL, metadata]``."""
        text = f"{self.label} - {self.locator}"
        if self.metadata:
            text += ", " + ", ".join(f"{k}={v}" for k, v in sorted(self.metadata.items()))
        return f"[{text}]"

    def __hash__(self) -> int:
        return hash(self.key)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Source):
            return NotImplemented
        return (self.label, self.locator, self.metadata or None) == (
            other.label,
            other.locator,
            other.metadata or None,
        )

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"label": self.label, "locator": self.locator}
        if self.metadata:
            d["metadata"] = dict(self.metadata)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any] | str) -> "Source":
        if isinstance(data, str):
            return cls(label=data, locator="")
        meta = data.get("metadata")
        return cls(str(data["label"]), str(data.get("locator", "")), dict(meta) if meta else None)


def dedup_sources(*groups) -> list[Source]:
    """Union of source lists, first occurrence of each (label, locator) wins."""
    seen: set[tuple[str, str]] = set()
    out: list[Source] = []
    for group in groups:
        for src in group:
            if src.key not in seen:
                seen.add(src.key)
                out.append(src)
    return out


@dataclass(frozen=True)
class ToolTraceEntry:
    tool: str
    outcome: str

    def to_list(self) -> list[str]:
        return [self.tool, self.outcome]


@dataclass(frozen=True)
class AgentResult:
    sub_question_id: str
    content: str
    sources: tuple[Source, ...] = ()
    tokens_used: int = 0
    tool_trace: tuple[ToolTraceEntry, ...] = ()
    duration: float = 0.0
    attempt: int = 1
    merged_from_attempts: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "tool_trace", tuple(self.tool_trace))
        object.__setattr__(self, "merged_from_attempts", tuple(self.merged_from_attempts))
        if self.attempt < 1:
            raise ValueError("attempt must be >= 1")
        if self.tokens_used < 0:
            raise ValueError("tokens_used must be >= 0")
        if any(a >= self.attempt for a in self.merged_from_attempts):
            raise ValueError("merged_from_attempts must precede the current attempt")

    @property
    def failure(self) -> str | None:
        """Failure tag (``timeout``, ``error``...) if this result carries no answer."""
        if self.content.strip():
            return None
        for entry in reversed(self.tool_trace):
            if entry.tool == EXECUTION_MARKER and entry.outcome.startswith(FAILED_PREFIX):
                return entry.outcome[len(FAILED_PREFIX):]
        return None

    @property
    def failed(self) -> bool:
        return self.failure is not None

    @property
    def degraded(self) -> bool:
        return any(e.tool == FALLBACK_MARKER for e in self.tool_trace)

    def to_dict(self) -> dict[str, Any]:
        return {
            "sub_question_id": self.sub_question_id,
            "content": self.content,
            "sources": [s.to_dict() for s in self.sources],
            "tokens_used": self.tokens_used,
            "tool_trace": [e.to_list() for e in self.tool_trace],
            "duration": self.duration,
            "attempt": self.attempt,
            "merged_from_attempts": list(self.merged_from_attempts),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AgentResult":
        return cls(
            sub_question_id=data["sub_question_id"],
            content=data.get("content", ""),
            sources=tuple(Source.from_dict(s) for s in data.get("sources", [])),
            tokens_used=int(data.get("tokens_used", 0)),
            tool_trace=tuple(ToolTraceEntry(t, o) for t, o in data.get("tool_trace", [])),
            duration=float(data.get("duration", 0.0)),
            attempt=int(data.get("attempt", 1)),
            merged_from_attempts=tuple(data.get("merged_from_attempts", [])),
        )


def failed_result(
    sub_question_id: str,
    reason: str,
    *,
    attempt: int = 1,
    duration: float = 0.0,
    tokens_used: int = 0,
    trace: tuple[ToolTraceEntry, ...] = (),
) -> AgentResult:
    return AgentResult(
        sub_question_id=sub_question_id,
        content="",
        tokens_used=tokens_used,
        tool_trace=tuple(trace) + (ToolTraceEntry(EXECUTION_MARKER, FAILED_PREFIX + reason),),
        duration=duration,
        attempt=attempt,
    )

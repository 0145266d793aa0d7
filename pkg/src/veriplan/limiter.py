"""Per-execution tool-call limiter."""
from __future__ import annotations

from dataclasses import dataclass

MAX_CONSECUTIVE_SAME_TOOL = 10
MAX_TOTAL_TOOL_CALLS = 50


@dataclass(frozen=True)
class Allow:
    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Deny:
    reason: str  # "consecutive" | "total"

    def __bool__(self) -> bool:
        return False


ALLOW = Allow()


@dataclass
class ToolCallLimiter:
    """Counts tool calls made by one agent execution.

    A denied call is not counted. Once anything is denied the limiter is
    latched: every later call gets the same deny back.
    """

    max_consecutive: int = MAX_CONSECUTIVE_SAME_TOOL
    max_total: int = MAX_TOTAL_TOOL_CALLS
    last_tool: str | None = None
    consecutive_count: int = 0
    total_count: int = 0
    denied: Deny | None = None

    def record(self, tool: str) -> Allow | Deny:
        if self.denied is not None:
            return self.denied
        consecutive = self.consecutive_count + 1 if tool == self.last_tool else 1
        if consecutive > self.max_consecutive:
            self.denied = Deny("consecutive")
            return self.denied
        if self.total_count + 1 > self.max_total:
            self.denied = Deny("total")
            return self.denied
        self.last_tool = tool
        self.consecutive_count = consecutive
        self.total_count += 1
        return ALLOW


def record_tool_call(limiter: ToolCallLimiter, tool: str) -> Allow | Deny:
    return limiter.record(tool)

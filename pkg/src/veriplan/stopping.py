"""Stop conditions, evaluated after every verify phase."""
from __future__ import annotations

import enum
import json
import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import TYPE_CHECKING, Any

from .verification import mean_confidence

if TYPE_CHECKING:
    from .orchestrator import OrchestrationState

# absorbs float noise in ratio differences such as 0.25 - 0.2
EPS = 1e-9


@dataclass(frozen=True)
class OrchestrationConfig:
    max_iterations: int = 3
    token_budget: int = 1_000_000
    ready_threshold: float = 0.8
    high_confidence: float = 0.75
    high_confidence_min_complete: float = 0.5
    diminishing_returns: float = 0.05
    max_concurrent: int = 3
    agent_timeout: float = 600.0

    def __post_init__(self):
        for name in ("max_iterations", "token_budget", "max_concurrent"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.agent_timeout <= 0:
            raise ValueError("agent_timeout must be positive")
        for name in ("ready_threshold", "high_confidence", "high_confidence_min_complete", "diminishing_returns"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "OrchestrationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "agent_timeout" in kwargs:
            kwargs["agent_timeout"] = parse_duration(kwargs["agent_timeout"])
        if "token_budget" in kwargs:
            kwargs["token_budget"] = parse_count(kwargs["token_budget"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "OrchestrationConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def parse_duration(value: Any) -> float:
    """Seconds from ``600``, ``"600s"``, ``"10m"`` or ``"250ms"``."""
    if isinstance(value, (int, float)):
        return float(value)
    m = re.fullmatch(r"\s*([0-9.]+)\s*(ms|s|m|h)?\s*", str(value))
    if not m:
        raise ValueError(f"bad duration {value!r}")
    scale = {"ms": 0.001, "s": 1, "m": 60, "h": 3600, None: 1}[m.group(2)]
    return float(m.group(1)) * scale


def parse_count(value: Any) -> int:
    """Integer from ``1000000``, ``"1M"`` or ``"850K"``."""
    if isinstance(value, int):
        return value
    m = re.fullmatch(r"\s*([0-9.]+)\s*([kKmM])?\s*", str(value))
    if not m:
        raise ValueError(f"bad count {value!r}")
    scale = {"k": 1_000, "m": 1_000_000, None: 1}[m.group(2) and m.group(2).lower()]
    return int(round(float(m.group(1)) * scale))


class StopOutcome(enum.Enum):
    CONTINUE = "continue"
    READY_FOR_SYNTHESIS = "ready_for_synthesis"
    HIGH_CONFIDENCE = "high_confidence"
    DIMINISHING_RETURNS = "diminishing_returns"
    TOKEN_BUDGET = "token_budget"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class StopDecision:
    outcome: StopOutcome
    detail: str = ""

    @property
    def stop(self) -> bool:
        return self.outcome is not StopOutcome.CONTINUE

    def to_dict(self) -> dict[str, str]:
        return {"outcome": self.outcome.value, "detail": self.detail}

    @classmethod
    def from_dict(cls, data: dict[str, str]) -> "StopDecision":
        return cls(StopOutcome(data["outcome"]), data.get("detail", ""))


def budget_stop(total: int, budget: int) -> StopDecision:
    return StopDecision(StopOutcome.TOKEN_BUDGET, f"tokens {total} >= budget {budget}")


def evaluate_stop(state: "OrchestrationState", config: OrchestrationConfig) -> StopDecision:
    """First firing condition in precedence order, else Continue.

    Hard limits (tokens, iterations) are checked before the quality
    conditions so a budget stop can never be masked.
    """
    if not state.completeness_history:
        raise ValueError("evaluate_stop needs at least one completed verify phase")
    tokens = state.ledger.total
    if tokens >= config.token_budget:
        return budget_stop(tokens, config.token_budget)
    if state.iteration >= config.max_iterations:
        return StopDecision(
            StopOutcome.MAX_ITERATIONS, f"iteration {state.iteration} >= max_iterations {config.max_iterations}"
        )
    ratio = state.completeness_history[-1]
    if ratio >= config.ready_threshold - EPS:
        return StopDecision(
            StopOutcome.READY_FOR_SYNTHESIS, f"completeness {ratio:.4f} >= ready_threshold {config.ready_threshold}"
        )
    conf = mean_confidence(state.records)
    if conf >= config.high_confidence - EPS and ratio >= config.high_confidence_min_complete - EPS:
        return StopDecision(
            StopOutcome.HIGH_CONFIDENCE,
            f"confidence {conf:.4f} >= high_confidence {config.high_confidence} and completeness "
            f"{ratio:.4f} >= {config.high_confidence_min_complete}",
        )
    if len(state.completeness_history) >= 2:
        gain = ratio - state.completeness_history[-2]
        if gain < config.diminishing_returns - EPS:
            return StopDecision(
                StopOutcome.DIMINISHING_RETURNS,
                f"improvement {gain:.4f} < diminishing_returns {config.diminishing_returns}",
            )
    return StopDecision(StopOutcome.CONTINUE, f"completeness {ratio:.4f}, confidence {conf:.4f}")

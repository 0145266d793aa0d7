from __future__ import annotations

import enum
import threading
from typing import Any


class Phase(enum.Enum):
    PLAN = "plan"
    EXECUTE = "execute"
    VERIFY = "verify"
    REPLAN = "replan"
    SYNTHESIZE = "synthesize"


class TokenLedger:
    """Per-phase token tallies; ``total`` always equals their sum."""

    def __init__(self, tallies: dict[Phase, int] | None = None):
        self._tallies = {p: 0 for p in Phase}
        for phase, amount in (tallies or {}).items():
            self._tallies[Phase(phase)] = int(amount)
        self._lock = threading.Lock()

    def charge(self, phase: Phase, amount: int) -> "TokenLedger":
        if amount < 0:
            raise ValueError("token charge must be non-negative")
        with self._lock:
            self._tallies[Phase(phase)] += int(amount)
        return self

    def tally(self, phase: Phase) -> int:
        return self._tallies[Phase(phase)]

    @property
    def tallies(self) -> dict[Phase, int]:
        return dict(self._tallies)

    @property
    def total(self) -> int:
        return sum(self._tallies.values())

    def share(self, phase: Phase) -> float:
        total = self.total
        return self._tallies[Phase(phase)] / total if total else 0.0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TokenLedger):
            return NotImplemented
        return self._tallies == other._tallies

    def __repr__(self) -> str:
        parts = ", ".join(f"{p.value}={n}" for p, n in self._tallies.items())
        return f"TokenLedger({parts}, total={self.total})"

    def to_dict(self) -> dict[str, Any]:
        return {p.value: n for p, n in self._tallies.items()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TokenLedger":
        return cls({Phase(k): v for k, v in data.items()})


def charge_tokens(ledger: TokenLedger, phase: Phase, amount: int) -> TokenLedger:
    return ledger.charge(phase, amount)

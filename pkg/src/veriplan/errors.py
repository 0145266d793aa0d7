"""Exception types raised by the engine.

Backend failures during a run are mostly absorbed (failure-marked results,
synthetic verification records); the exceptions here are for caller bugs,
malformed input documents and store lookups.
"""


class VeriplanError(Exception):
    pass


class InvalidPlanError(VeriplanError):
    def __init__(self, report):
        self.report = report
        super().__init__("invalid plan: " + "; ".join(v.message for v in report.violations))


class SchedulingError(VeriplanError):
    """Internal invariant broken by the coordinator (never expected in a valid run)."""


class BackendError(VeriplanError):
    """Raised by a backend that could not produce a usable response."""

    def __init__(self, message: str, tag: str = "error"):
        super().__init__(message)
        self.tag = tag


class ScenarioError(VeriplanError):
    pass


class RegistrationError(VeriplanError):
    pass


class RunStoreError(VeriplanError):
    pass


class RunNotFoundError(RunStoreError):
    pass


class CorruptLogError(RunStoreError):
    def __init__(self, seq: int, reason: str):
        self.seq = seq
        super().__init__(f"corrupt event log at sequence {seq}: {reason}")

"""Verification-driven orchestration of specialised agents over a DAG of sub-questions."""
from .backends import BackendRegistry, Phase, TokenLedger
from .backends.scripted import Scenario
from .events import EventKind, EventLog, RunEvent
from .executor import ExecutorConfig, execute_plan
from .orchestrator import OrchestrationState, RunMode, RunReport, run
from .plan import AgentType, ExecutionPlan, SubQuestion, Tier, validate_plan, wave_decomposition
from .results import AgentResult, Source
from .simulation import run_scenario
from .stopping import OrchestrationConfig, StopDecision, StopOutcome, evaluate_stop
from .store import RunStore
from .synthesis import FinalAnswer
from .verification import Recommendation, Status, VerificationRecord

__version__ = "0.1.0"

__all__ = [
    "AgentResult",
    "AgentType",
    "BackendRegistry",
    "EventKind",
    "EventLog",
    "ExecutionPlan",
    "ExecutorConfig",
    "FinalAnswer",
    "OrchestrationConfig",
    "OrchestrationState",
    "Phase",
    "Recommendation",
    "RunEvent",
    "RunMode",
    "RunReport",
    "RunStore",
    "Scenario",
    "Source",
    "Status",
    "StopDecision",
    "StopOutcome",
    "SubQuestion",
    "Tier",
    "TokenLedger",
    "VerificationRecord",
    "evaluate_stop",
    "execute_plan",
    "run",
    "run_scenario",
    "validate_plan",
    "wave_decomposition",
]

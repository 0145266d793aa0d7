"""Offline runs against a scripted scenario on a simulated clock."""
from __future__ import annotations

from pathlib import Path

from .backends.scripted import Scenario
from .dispatch import SimClock, SimulatedDispatch
from .events import EventLog
from .executor import ExecutorConfig
from .orchestrator import RunMode, RunReport, run
from .stopping import OrchestrationConfig

DEMO_SCENARIO = Path(__file__).parent / "data" / "demo_scenario.json"


def load_demo() -> Scenario:
    return Scenario.load(DEMO_SCENARIO)


def run_scenario(
    scenario: Scenario | str | Path,
    query: str | None = None,
    config: OrchestrationConfig | None = None,
    *,
    mode: RunMode = RunMode.FULL,
    executor_config: ExecutorConfig | None = None,
    tools=None,
) -> RunReport:
    """Run deterministically: same scenario and seed give the same event log."""
    if not isinstance(scenario, Scenario):
        scenario = Scenario.load(scenario)
    clock = SimClock()
    return run(
        query if query is not None else scenario.query,
        config or OrchestrationConfig(),
        scenario.registry(tools=tools),
        EventLog(clock),
        mode=mode,
        dispatch=SimulatedDispatch(clock),
        executor_config=executor_config,
    )

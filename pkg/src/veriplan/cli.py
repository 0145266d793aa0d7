"""Command-line entry point.

    veriplan run [QUERY] --scenario demo.json [--mode full] [--out DIR]
    veriplan validate-plan plan.json
    veriplan replay RUN_DIR [--follow] [--events]

Exit codes: 0 success, 1 run failure / invalid plan / corrupt log, 2 usage error.
"""
from __future__ import annotations

import argparse
import importlib
import os
import sys
import time
from datetime import datetime
from pathlib import Path

from .backends.scripted import Scenario
from .errors import CorruptLogError, ScenarioError
from .events import parse_events, to_sse
from .orchestrator import RunMode, run
from .plan import ExecutionPlan, validate_plan
from .report import render_report
from .simulation import run_scenario
from .stopping import OrchestrationConfig
from .store import EVENTS_FILE, write_run_dir

LIVE_BACKEND_ENV = "VERIPLAN_BACKEND"
MODES = {"full": RunMode.FULL, "static-pipeline": RunMode.STATIC_PIPELINE, "single-agent": RunMode.SINGLE_AGENT}


class UsageError(Exception):
    pass


def _load_config(path: str | None) -> OrchestrationConfig:
    if path is None:
        return OrchestrationConfig()
    try:
        return OrchestrationConfig.load(path)
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot load config {path}: {exc}") from exc


def _live_registry(config: OrchestrationConfig):
    spec = os.environ.get(LIVE_BACKEND_ENV)
    if not spec or ":" not in spec:
        raise UsageError(f"--live needs {LIVE_BACKEND_ENV}=module:factory returning a BackendRegistry")
    module, _, attr = spec.partition(":")
    try:
        factory = getattr(importlib.import_module(module), attr)
    except (ImportError, AttributeError) as exc:
        raise UsageError(f"cannot import live backend factory {spec}: {exc}") from exc
    return factory(config)


def cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    mode = MODES[args.mode]
    if args.live:
        query = args.query
        if not query:
            raise UsageError("a query is required with --live")
        report = run(query, config, _live_registry(config), mode=mode)
    else:
        try:
            scenario = Scenario.load(args.scenario)
        except ScenarioError as exc:
            raise UsageError(str(exc)) from exc
        query = args.query or scenario.query
        if not query:
            raise UsageError("no query given and the scenario has none")
        report = run_scenario(scenario, query, config, mode=mode)

    out = Path(args.out) if args.out else Path("runs") / datetime.now().strftime("%Y%m%d-%H%M%S")
    write_run_dir(out, report.state, report.events)
    text = render_report(report.events)
    (out / "report.txt").write_text(text)
    if not args.quiet:
        sys.stdout.write(text)
    print(f"run artifacts: {out}", file=sys.stderr)
    return 0 if report.ok else 1


def cmd_validate_plan(args: argparse.Namespace) -> int:
    try:
        plan = ExecutionPlan.load(args.path)
    except OSError as exc:
        raise UsageError(f"cannot read {args.path}: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot parse plan {args.path}: {exc!r}") from exc
    report = validate_plan(plan)
    if report.ok:
        print(f"ok: {len(plan)} sub-questions")
        return 0
    for v in report.violations:
        print(f"{v.kind}: {v.message}")
    return 1


def cmd_replay(args: argparse.Namespace) -> int:
    log = Path(args.run_dir) / EVENTS_FILE
    if not log.is_file():
        print(f"no event log in {args.run_dir}", file=sys.stderr)
        return 1
    try:
        events = parse_events(log.read_text())
    except CorruptLogError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    if args.follow or args.events:
        prev = events[0].timestamp
        for ev in events:
            if args.follow:
                time.sleep(min(2.0, max(0.0, ev.timestamp - prev) / args.speed))
                prev = ev.timestamp
            sys.stdout.write(to_sse(ev))
            sys.stdout.flush()
    sys.stdout.write(render_report(events))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="veriplan", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an orchestration")
    p.add_argument("query", nargs="?", help="query text (defaults to the scenario's query)")
    p.add_argument("--config", help="JSON config with the orchestration parameters")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="scripted scenario JSON (simulated clock)")
    src.add_argument("--live", action="store_true", help=f"use the backend factory named by ${LIVE_BACKEND_ENV}")
    p.add_argument("--mode", choices=sorted(MODES), default="full")
    p.add_argument("--out", help="run directory (default ./runs/<timestamp>)")
    p.add_argument("--quiet", action="store_true", help="do not print the report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate-plan", help="check a plan document")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate_plan)

    p = sub.add_parser("replay", help="re-emit a stored run's events and report")
    p.add_argument("run_dir")
    p.add_argument("--follow", action="store_true", help="pace events by their recorded timestamps")
    p.add_argument("--events", action="store_true", help="print events as SSE frames before the report")
    p.add_argument("--speed", type=float, default=1.0, help="--follow pacing speed-up factor")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

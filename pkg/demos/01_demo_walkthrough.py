"""
Walkthrough: one query through plan, execute, verify, replan and synthesize
============================================================================

The shipped demo scenario scripts five sub-questions answered by two
agent types. On the first pass two answers come back thin, the
verifier marks them incomplete, the replanner retries them, and one of
them improves enough for the run to stop with 4 of 5 complete.

Everything runs on a simulated clock, so the output is identical on
every run and takes a few milliseconds.
"""
from veriplan import EventKind, RunMode, run_scenario, wave_decomposition
from veriplan.simulation import load_demo

scenario = load_demo()

# %%
# The plan
# --------
# Sub-questions form a DAG; waves are the sets that can run side by side.
plan = scenario.plan
for sq in plan:
    deps = ", ".join(sorted(sq.dependencies)) or "-"
    print(f"{sq.id}  [{sq.agent_type.value:<10}] p={sq.priority:<2} deps={deps:<16} {sq.question}")
print("waves:", [sorted(w) for w in wave_decomposition(plan)])

# %%
# Running it
# ----------
report = run_scenario(scenario)
print()
print(report.render())

# %%
# What happened, from the event stream
# ------------------------------------
# Every phase and every sub-question execution is an event with a
# gap-free sequence number; the report above is rendered from these alone.
for ev in report.events:
    if ev.kind in (EventKind.PHASE_STARTED, EventKind.STOP_TRIGGERED):
        print(f"{ev.seq:>3} t={ev.timestamp:7.3f}s {ev.kind.value:<15} {ev.payload.get('phase', ev.payload.get('outcome'))}")

# %%
# Retried answers keep their history
# ----------------------------------
merged = report.state.results["sq_004"]
print()
print(f"sq_004 went through attempts {merged.merged_from_attempts + (merged.attempt,)}; "
      f"{merged.tokens_used:,} tokens in total")
print(merged.content)

# %%
# Baselines on the same scenario
# ------------------------------
# The fixed pipeline and the single agent skip verification, so their
# completeness is measured afterwards by an unbilled verifier pass.
print()
print(f"{'mode':<16}{'tokens':>10}{'completeness':>14}")
for mode in RunMode:
    r = run_scenario(scenario, mode=mode)
    print(f"{mode.value:<16}{r.state.ledger.total:>10,}{r.final_completeness:>14.2f}")

"""
Persisting runs and replaying them
==================================

A run directory holds ``plan.json``, ``state.json`` and ``events.log``
(one JSON event per line). The report is a pure function of the event
log, so a replay reproduces it byte for byte, and the events can be
re-emitted as Server-Sent Events frames for a browser client.
"""
import tempfile
from pathlib import Path

from veriplan import RunStore, run_scenario
from veriplan.events import to_sse
from veriplan.report import render_report
from veriplan.simulation import DEMO_SCENARIO

root = Path(tempfile.mkdtemp(prefix="veriplan-runs-"))
store = RunStore(root)

report = run_scenario(DEMO_SCENARIO)
run_id = store.persist(report.state, report.events)
print("stored run", run_id, "in", store.path(run_id))
for f in sorted(store.path(run_id).iterdir()):
    print(f"  {f.name:<11}{f.stat().st_size:>8} bytes")

# %%
# Loading gives back an equal state object.
state = store.load(run_id)
print("state equal after reload:", state == report.state)

# %%
# Replaying: same report, byte for byte.
replayed = render_report(store.events(run_id))
print("replayed report identical:", replayed == render_report(report.events))

# %%
# The first few events as SSE frames.
for ev in store.events(run_id)[:3]:
    print(to_sse(ev), end="")

# %%
# A damaged log is refused with the first bad sequence number.
log = store.path(run_id) / "events.log"
lines = log.read_text().splitlines(keepends=True)
log.write_text("".join(lines[:10]))
try:
    store.events(run_id)
except Exception as exc:
    print(type(exc).__name__ + ":", exc)

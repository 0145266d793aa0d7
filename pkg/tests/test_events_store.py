import json
import random
import threading

import pytest
from hypothesis import given, settings, strategies as st

from veriplan.errors import CorruptLogError, RunNotFoundError, RunStoreError
from veriplan.events import EventKind, EventLog, dump_events, parse_events, to_sse
from veriplan.report import render_report
from veriplan.simulation import DEMO_SCENARIO, run_scenario
from veriplan.store import STATE_FILE, RunStore, load_state, persist_state

from state_gen import random_state


def test_sequence_numbers_gap_free_across_threads():
    log = EventLog()

    def work():
        for _ in range(200):
            log.emit(EventKind.PHASE_STARTED, {"phase": "execute"})

    threads = [threading.Thread(target=work) for _ in range(5)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert [e.seq for e in log.events] == list(range(1000))


def test_subscribers_see_events_in_order():
    log = EventLog()
    seen = []
    log.subscribe(lambda e: seen.append(e.seq))
    for _ in range(3):
        log.emit(EventKind.RUN_STARTED)
    assert seen == [0, 1, 2]


def test_sse_frame():
    log = EventLog(lambda: 1.5)
    ev = log.emit(EventKind.STOP_TRIGGERED, {"outcome": "max_iterations"})
    frame = to_sse(ev)
    assert frame.startswith("event: StopTriggered\nid: 0\ndata: {") and frame.endswith("}\n\n")
    assert json.loads(frame.split("data: ")[1])["payload"] == {"outcome": "max_iterations"}


def test_log_round_trip_and_digest_stable():
    a = run_scenario(DEMO_SCENARIO)
    text = dump_events(a.events)
    assert dump_events(parse_events(text)) == text


@pytest.mark.parametrize(
    "mutate, bad_seq",
    [
        (lambda lines: lines[:5], 5),                       # truncated before RunFinished
        (lambda lines: lines[:3] + lines[4:], 3),           # gap
        (lambda lines: lines[:2] + ["{oops"] + lines[3:], 2),  # garbage
        (lambda lines: [], 0),                              # empty
    ],
)
def test_corrupt_logs_name_first_bad_seq(mutate, bad_seq):
    lines = dump_events(run_scenario(DEMO_SCENARIO).events).splitlines()
    text = "\n".join(mutate(lines))
    with pytest.raises(CorruptLogError) as err:
        parse_events(text + "\n" if text else "")
    assert err.value.seq == bad_seq


def test_store_round_trip(tmp_path):
    report = run_scenario(DEMO_SCENARIO)
    store = RunStore(tmp_path)
    run_id = persist_state(report.state, store, report.events)
    assert store.runs() == [run_id]
    assert load_state(run_id, store) == report.state
    assert render_report(store.events(run_id)) == render_report(report.events)


def test_store_errors(tmp_path):
    store = RunStore(tmp_path)
    with pytest.raises(RunNotFoundError):
        store.load("nope")
    run_id = store.persist(run_scenario(DEMO_SCENARIO).state)
    (store.path(run_id) / STATE_FILE).write_text("{broken")
    with pytest.raises(RunStoreError):
        store.load(run_id)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_random_states_survive_persistence(tmp_path_factory, seed):
    state = random_state(random.Random(seed))
    store = RunStore(tmp_path_factory.mktemp("runs"))
    assert store.load(store.persist(state)) == state

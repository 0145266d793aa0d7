import json
import threading
import time

import pytest
from hypothesis import given, strategies as st

from veriplan.backends import (
    BackendRegistry,
    Phase,
    TokenLedger,
    ToolServer,
    ToolSession,
    list_tools,
    route_with_fallback,
    tool_service_call,
)
from veriplan.backends.base import AgentRequest
from veriplan.backends.scripted import Scenario
from veriplan.errors import BackendError, RegistrationError, ScenarioError
from veriplan.limiter import ToolCallLimiter, record_tool_call
from veriplan.plan import AgentType, SubQuestion
from veriplan.results import AgentResult


# -- limiter --------------------------------------------------------------------------

def run_calls(seq, limiter=None):
    limiter = limiter or ToolCallLimiter()
    return [bool(record_tool_call(limiter, t)) for t in seq]


def test_eleventh_consecutive_call_denied():
    out = run_calls(["a"] * 11)
    assert out == [True] * 10 + [False]


def test_tool_change_resets_consecutive_count():
    assert all(run_calls(["a"] * 10 + ["b"] + ["a"] * 10))


def test_fifty_first_total_denied():
    seq = (["a", "b"] * 30)[:51]
    assert run_calls(seq) == [True] * 50 + [False]


def test_deny_is_latched():
    limiter = ToolCallLimiter()
    run_calls(["a"] * 11, limiter)
    assert not limiter.record("b") and limiter.total_count == 10


def oracle_limiter(seq, max_consecutive=10, max_total=50):
    out, last, run, total, dead = [], None, 0, 0, False
    for t in seq:
        if dead:
            out.append(False)
            continue
        r = run + 1 if t == last else 1
        if r > max_consecutive or total + 1 > max_total:
            dead = True
            out.append(False)
            continue
        last, run, total = t, r, total + 1
        out.append(True)
    return out


@given(st.lists(st.sampled_from("ab"), max_size=60))
def test_limiter_matches_oracle(seq):
    assert run_calls(seq) == oracle_limiter(seq)


# -- ledger ---------------------------------------------------------------------------

def test_ledger_total_and_shares():
    ledger = TokenLedger()
    ledger.charge(Phase.EXECUTE, 300).charge(Phase.VERIFY, 100)
    assert ledger.total == 400 and ledger.share(Phase.EXECUTE) == 0.75
    assert TokenLedger.from_dict(ledger.to_dict()) == ledger
    with pytest.raises(ValueError):
        ledger.charge(Phase.PLAN, -1)


def test_ledger_thread_safe():
    ledger = TokenLedger()

    def work():
        for _ in range(1000):
            ledger.charge(Phase.EXECUTE, 1)

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert ledger.total == 8000


# -- tool service ---------------------------------------------------------------------

@pytest.fixture
def server():
    def stall(args):
        time.sleep(float(args.get("seconds", 1)))
        return "late"

    def explode(args):
        raise ValueError("bad input")

    with ToolServer({"echo": lambda a: {"echo": a}, "stall": stall, "explode": explode}) as srv:
        yield srv


def test_tool_echo_and_listing(server):
    resp = tool_service_call(server.endpoint, "echo", {"x": 1})
    assert resp.ok and resp.result == {"echo": {"x": 1}}
    assert list_tools(server.endpoint) == ["echo", "explode", "stall"]


def test_tool_errors_are_values(server):
    assert tool_service_call(server.endpoint, "explode", {}).outcome == "error"
    assert tool_service_call(server.endpoint, "missing", {}).outcome == "error"
    assert tool_service_call(server.endpoint, "stall", {"seconds": 2}, timeout=0.2).outcome == "timeout"
    assert tool_service_call("http://127.0.0.1:9", "echo", {}, timeout=0.5).outcome == "transport"


def test_session_denied_call_never_reaches_wire(server):
    hits = []
    server.tools["count"] = lambda a: hits.append(1) or len(hits)
    session = ToolSession(server.endpoint, ToolCallLimiter(max_consecutive=3))
    outcomes = [session.call("count").outcome for _ in range(5)]
    assert outcomes == ["ok", "ok", "ok", "denied", "denied"]
    assert len(hits) == 3
    assert [e.outcome for e in session.trace][-1] == "denied:consecutive"


def test_session_with_local_tools():
    session = ToolSession({"add": lambda a: a["x"] + 1})
    assert session.call("add", {"x": 1}).result == 2
    assert session.call("nope").outcome == "error"


# -- routing ------------------------------------------------------------------------

class Fixed:
    def __init__(self, result=None, exc=None):
        self.result, self.exc = result, exc

    def run(self, request):
        if self.exc:
            raise self.exc
        return self.result


SQ = SubQuestion("a", "q", AgentType.FINANCIAL)
REQ = AgentRequest(SQ, "q", 1, None)


def registry(primary, fallback=None):
    fb = {AgentType.FINANCIAL: fallback} if fallback else {}
    return BackendRegistry(None, {AgentType.FINANCIAL: primary}, None, None, None, fb)


def test_primary_success_untagged():
    out = route_with_fallback(AgentType.FINANCIAL, REQ, registry(Fixed(AgentResult("a", "ok"))))
    assert not out.degraded and not out.failed


def test_fallback_after_exception_is_degraded():
    reg = registry(Fixed(exc=BackendError("x", tag="quota")), Fixed(AgentResult("a", "backup", tokens_used=3)))
    out = route_with_fallback(AgentType.FINANCIAL, REQ, reg)
    assert out.degraded and out.content == "backup" and out.tokens_used == 3
    assert out.tool_trace[0].outcome == "failed:quota"


def test_both_fail():
    reg = registry(Fixed(exc=RuntimeError()), Fixed(exc=BackendError("y", tag="down")))
    out = route_with_fallback(AgentType.FINANCIAL, REQ, reg)
    assert out.failure == "down"


def test_missing_agent_registration():
    reg = BackendRegistry(None, {}, None, None, None)
    with pytest.raises(RegistrationError):
        route_with_fallback(AgentType.FINANCIAL, REQ, reg)
    with pytest.raises(RegistrationError):
        reg.check_covers([AgentType.RAG])


# -- scripted scenario --------------------------------------------------------------

def test_scenario_errors(tmp_path):
    with pytest.raises(ScenarioError):
        Scenario.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError):
        Scenario.load(bad)
    bad.write_text(json.dumps({"plan": {"sub_questions": []}}))
    with pytest.raises(ScenarioError):
        Scenario.load(bad)


def test_scripted_agent_match_precedence_and_attempts():
    doc = {
        "plan": {"sub_questions": [{"id": "x1", "question": "revenue trend", "agent_type": "financial"}]},
        "agents": [
            {"agent_type": "*", "match": "*", "attempts": [{"content": "wild"}]},
            {"agent_type": "financial", "match": "revenue", "attempts": [{"content": "sub1"}, {"content": "sub2"}]},
            {"agent_type": "financial", "match": "x1", "attempts": [{"content": "exact"}]},
        ],
        "verifier": [{"match": "*", "status": "complete", "score": 1, "confidence": 1, "recommendation": "accept"}],
    }
    reg = Scenario.from_dict(doc).registry()
    sq = SubQuestion("x1", "revenue trend", AgentType.FINANCIAL)
    assert reg.agents[AgentType.FINANCIAL].run(AgentRequest(sq, "", 1, None)).content == "exact"
    other = SubQuestion("x2", "revenue trend", AgentType.FINANCIAL)
    agent = reg.agents[AgentType.FINANCIAL]
    assert [agent.run(AgentRequest(other, "", n, None)).content for n in (1, 2, 3)] == ["sub1", "sub2", "sub2"]
    assert reg.agents[AgentType.RAG].run(AgentRequest(SubQuestion("z", "?", AgentType.RAG), "", 1, None)).content == "wild"


def test_jitter_is_seeded():
    doc = {
        "seed": 3,
        "latency_jitter_ms": 500,
        "plan": {"sub_questions": [{"id": "x", "question": "q", "agent_type": "rag"}]},
        "agents": [{"match": "*", "attempts": [{"content": "c", "latency_ms": 100}]}],
        "verifier": [{"match": "*", "status": "partial", "score": 0.5, "confidence": 0.5}],
    }
    sq = SubQuestion("x", "q", AgentType.RAG)
    runs = [Scenario.from_dict(doc).registry().agents[AgentType.RAG].run(AgentRequest(sq, "", 1, None)).duration
            for _ in range(3)]
    assert len(set(runs)) == 1 and 0.1 <= runs[0] <= 0.6

"""Human-readable run report, rendered purely from the event log.

Because nothing but events goes in, replaying a stored log reproduces
the original report byte for byte. Timestamps are deliberately left out.
"""
from __future__ import annotations

from typing import Iterable

from .backends.ledger import Phase
from .events import EventKind, RunEvent
from .synthesis import FinalAnswer


def render_report(events: Iterable[RunEvent]) -> str:
    out: list[str] = []
    tokens = {p.value: 0 for p in Phase}
    total = 0
    answer: FinalAnswer | None = None
    finished = {}
    executed: list[str] = []
    verify_lines: list[str] = []
    current_iter = None

    for ev in events:
        p = ev.payload
        kind = ev.kind
        if kind is EventKind.RUN_STARTED:
            out += [
                "RUN REPORT",
                f"query: {p.get('query', '')}",
                f"mode: {p.get('mode', '')}",
                "",
                "Iteration trace (iteration 0 is the initial pass; each replan adds one)",
            ]
        elif kind is EventKind.PHASE_STARTED:
            it = p.get("iteration", 0)
            if p["phase"] == Phase.EXECUTE.value and it != current_iter:
                current_iter = it
                out.append(f"  iteration {it} (verify cycle {it + 1})")
            executed, verify_lines = [], []
        elif kind is EventKind.SUB_QUESTION_FINISHED:
            tag = f"{p['id']}#{p['attempt']}"
            if p.get("failure"):
                tag += f"[{p['failure']}]"
            elif p.get("degraded"):
                tag += "[degraded]"
            executed.append(tag)
        elif kind is EventKind.VERIFICATION_RECORDED:
            flag = " (reused)" if p.get("reused") else ""
            esc = " ESCALATED" if p.get("escalated") else ""
            verify_lines.append(
                f"        {p['id']}: {p['status']} score={p['score']:.2f} conf={p['confidence']:.2f} "
                f"-> {p['recommendation']}{flag}{esc}"
            )
        elif kind is EventKind.REPLAN_DECIDED:
            line = f"    replan: retry [{', '.join(p['retry'])}] new [{', '.join(p['new'])}]"
            out.append(line)
            for note in p.get("repairs", []):
                out.append(f"      repair: {note}")
            if p.get("rejected_new"):
                out.append(f"      rejected new: {', '.join(p['rejected_new'])}")
        elif kind is EventKind.PHASE_FINISHED:
            phase = p["phase"]
            tokens[phase] = tokens.get(phase, 0) + p["tokens"]
            total = p["ledger_total"]
            if phase == Phase.PLAN.value:
                out.append(f"  plan: {len(p.get('sub_questions', []))} sub-questions, {p['tokens']} tokens")
            elif phase == Phase.EXECUTE.value:
                out.append(f"    execute: {' '.join(executed) or '(nothing)'}; {p['tokens']} tokens")
            elif phase == Phase.VERIFY.value:
                out.append(
                    f"    verify: {p['complete']}/{p['verified']} complete (ratio {p['completeness']:.3f}), "
                    f"mean confidence {p['mean_confidence']:.3f}; {p['tokens']} tokens"
                )
                out += verify_lines
            elif phase == Phase.SYNTHESIZE.value:
                out.append(f"  synthesize: {p['tokens']} tokens")
        elif kind is EventKind.STOP_TRIGGERED:
            out.append(f"  stop: {p['outcome']} ({p['detail']})")
        elif kind is EventKind.SYNTHESIS_PRODUCED:
            answer = FinalAnswer.from_dict(p["answer"])
            if p.get("hierarchical"):
                out.append("    synthesis was hierarchical (grouped by agent type)")
        elif kind is EventKind.RUN_FINISHED:
            finished = p

    out += ["", "Tokens by phase"]
    for phase, n in tokens.items():
        share = 100.0 * n / total if total else 0.0
        out.append(f"  {phase:<11}{n:>12,}  {share:5.1f}%")
    out.append(f"  {'total':<11}{total:>12,}")
    out += ["", f"status: {finished.get('status', 'unknown')}"]
    if finished.get("error"):
        out.append(f"error: {finished['error']}")
    if "final_completeness" in finished:
        out.append(f"final completeness: {finished['final_completeness']:.3f}")
    if answer is not None:
        out += ["", "FINAL ANSWER", answer.render()]
    return "\n".join(out) + "\n"

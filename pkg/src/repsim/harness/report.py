"""Reports are a pure function of the event log, which is what makes replay exact."""

from __future__ import annotations

from collections import Counter

from repsim.errors import ScenarioMismatch
from repsim.harness.logio import check_log
from repsim.protocol import AUTHORITY, KEY_MANAGER, NETWORK, REPUTATION_MANAGER, LogView

_FIXED = {AUTHORITY, KEY_MANAGER, REPUTATION_MANAGER, NETWORK}


def _role(handle: str, engines) -> str:
    if handle in _FIXED or handle in engines:
        return handle
    return "businesses"


def build_report(lines: list[dict], authority_secrets: dict | None = None) -> dict:
    from repsim.harness.audit import audit, trust_flags

    check_log(lines)
    view = LogView(lines)
    h = view.header
    scores, history = {}, {}
    for l in lines:
        if l.get("kind") != "reveal":
            continue
        hist = history.setdefault(l["votee"], [])
        if not hist or hist[-1][0] != l["version"]:
            hist.append([l["version"], l["score"]])
        if l.get("final"):
            scores[l["votee"]] = l["score"]
    counts = {}
    ops = Counter()
    for l in view.msgs:
        for handle, side in ((l["sender"], "sent"), (l["receiver"], "received")):
            role = _role(handle, view.engine_keys)
            counts.setdefault(role, {"sent": 0, "received": 0})[side] += 1
        ops.update(l.get("ops", {}))
    events = [{k: v for k, v in l.items() if k not in ("kind", "seq", "tick")}
              for l in lines if l.get("kind") == "event"]
    result = audit(lines, authority_secrets)
    return {
        "format": h.get("format"),
        "seed": h.get("seed"),
        "backend": h.get("backend"),
        "scenario_digest": h.get("scenario_digest"),
        "scores": dict(sorted(scores.items())),
        "score_history": dict(sorted(history.items())),
        "message_counts": dict(sorted(counts.items())),
        "crypto_ops": dict(sorted(ops.items())),
        "events": events,
        "checks": result["checks"],
        "findings": [c for c in result["checks"] if c["status"] == "fail"],
        "evidence": result["evidence"],
        "flags": trust_flags(view),
    }


def replay(lines: list[dict], scenario=None) -> dict:
    """Rebuild the report from a log; with a scenario, insist it is the one that produced the log."""
    check_log(lines)
    if scenario is not None and lines[0].get("scenario_digest") != scenario.digest():
        raise ScenarioMismatch("log was produced by a different scenario")
    return build_report(lines)

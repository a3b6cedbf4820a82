"""
Cheating leaves evidence
========================

Each scripted deviation is injected into a small random scenario. The
auditor reads nothing but the event log, and every finding it makes can be
re-derived from that log by anyone holding it.
"""

from repsim.harness import MISBEHAVIORS, parse_log, run
from repsim.harness.generate import random_scenario
from repsim.protocol import Evidence

for kind in MISBEHAVIORS:
    result = run(random_scenario(7, n_businesses=4, n_ratings=10, misbehavior=kind))
    lines = parse_log(result.log_text)
    for e in result.report["evidence"]:
        ev = Evidence.from_dict(e)
        print(f"{kind:<18} -> {ev.kind:<15} messages {list(ev.messages)}  recheck={ev.recheck(lines)}")
        print(f"{'':<22}{ev.note}")
    failed = [c["check"] for c in result.report["findings"]]
    print(f"{'':<22}failed checks: {failed}\n")

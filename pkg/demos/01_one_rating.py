"""
One rating, end to end
======================

Two firms sign a contract, one rates the other, and a third asks whether
the votee clears a threshold. Every message goes through the event log,
so we can look at what each party actually saw.
"""

from repsim.harness import BusinessSpec, Scenario, run

# three firms; the votee has no self-rating, so only the voter's opinion counts
scenario = Scenario(
    seed=1,
    dimensions=1,
    businesses=[BusinessSpec("acme", "EU", None), BusinessSpec("bolt", "EU", None),
                BusinessSpec("cask", "EU", None)],
    events=[
        {"kind": "contract", "a": "acme", "b": "bolt"},
        {"kind": "rate", "voter": "acme", "votee": "bolt", "rating": [1.0]},
        {"kind": "query", "requester": "cask", "votee": "bolt", "mode": {"threshold": 0.5}},
        {"kind": "query", "requester": "cask", "votee": "bolt", "mode": {"threshold": 0.7}},
    ],
)
result = run(scenario)

# the message trail, with the crypto work each hop caused
for line in result.log.lines:
    if line.get("kind") == "msg":
        ops = ", ".join(f"{k}={v}" for k, v in line.get("ops", {}).items())
        print(f"{line['seq']:3d}  {line['sender'][:14]:>14} -> {line['receiver'][:14]:<14} {line['variant']:<20} {ops}")

# prior 0.5 with weight 1, voter weight 0.5 (its own prior), rating 1.0
expected = (0.5 * 1.0 + 0.5 * 1.0) / (1.0 + 0.5)
score = result.report["scores"][result.names["bolt"]][0]
print(f"\nbolt's score {score:.6f}, plaintext arithmetic {expected:.6f}")

answers = [e["result"] for e in result.report["events"] if e["type"] == "query"]
print("threshold 0.5 ->", answers[0], "| threshold 0.7 ->", answers[1])

print("\naudit:", {c["check"]: c["status"] for c in result.report["checks"]})

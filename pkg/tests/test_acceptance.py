"""Acceptance criteria 1-8, each reported as one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or as part of the
full suite; the summary lines are printed even when output is captured.
"""

import itertools
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from conftest import SIM_PARAMS
from helpers import eval_encrypted, eval_plain, oracle_scores, random_tree, within_bound
from repsim.bench import RATING_OPS, RATING_OPS_NO_SELF, session_ops
from repsim.harness import BusinessSpec, Scenario, audit, execute, load_scenario, parse_log, replay, run
from repsim.harness.generate import random_scenario
from repsim.he import make_backend
from repsim.protocol import Evidence, detect
from repsim.reputation import FeedbackEntry, SystemProfile, aggregate_plain

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
CORPUS = sorted(SCENARIOS.glob("*.json"))


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    return emit


# 1 -----------------------------------------------------------------------------

def test_criterion_1_he_contract(report):
    rng = np.random.default_rng(2024)
    be = make_backend(SIM_PARAMS, seed=7)
    km = be.keygen()
    t0 = time.perf_counter()
    ok = 0
    for _ in range(1000):
        tree = random_tree(rng, SIM_PARAMS.slot_count, max_mul_depth=2, max_adds=50)
        ct = eval_encrypted(be, km, tree)
        ok += within_bound(be.decrypt(km.secret_key, ct), eval_plain(tree), ct.error_bound)
    dt = time.perf_counter() - t0
    passed = ok == 1000 and dt < 10
    report(1, passed, f"{ok}/1000 trees within tracked error bound in {dt:.2f}s (limit 10s)")
    assert passed


# 2 -----------------------------------------------------------------------------

def _final_scores(lines):
    return {l["votee"]: l["score"] for l in lines if l.get("kind") == "reveal" and l.get("final")}


def test_criterion_2_oracle_equivalence(report):
    t0 = time.perf_counter()
    worst, bad, ratings = 0.0, [], 0
    for seed in range(100):
        sc = random_scenario(seed)
        ratings += sum(e["kind"] == "rate" for e in sc.events)
        w = execute(sc)
        got = _final_scores(w.net.log.lines)
        for name, want in oracle_scores(sc).items():
            err = max(abs(a - b) for a, b in zip(got[w.standing(name)], want))
            worst = max(worst, err)
            if err > 1e-3:
                bad.append((seed, name))
    dt = time.perf_counter() - t0
    passed = not bad and dt < 60
    report(2, passed, f"100 scenarios, {ratings} ratings, max |score - oracle| = {worst:.2e} (tol 1e-3), "
                      f"{len(bad)} misses, {dt:.1f}s (limit 60s)")
    assert passed


# 3 -----------------------------------------------------------------------------

def test_criterion_3_clean_audit(report):
    findings = {}
    for path in CORPUS:
        r = run(load_scenario(path))
        result = audit(parse_log(r.log_text), r.authority)
        failed = [c["check"] for c in result["checks"] if c["status"] == "fail"]
        if failed or result["evidence"]:
            findings[path.stem] = failed + [e["kind"] for e in result["evidence"]]
    passed = bool(CORPUS) and not findings
    report(3, passed, f"{len(CORPUS)} corpus scenarios audited with authority secrets, findings: {findings or 0}")
    assert passed


# 4 -----------------------------------------------------------------------------

FAULTS = {
    "token_replay": "ReplayedToken",
    "ticket_replay": "ReplayedTicket",
    "ciphertext_tamper": "TamperedUpdate",
    "forged_signature": "BadSignature",
    "double_spend_race": "ReplayedTicket",
}


def test_criterion_4_fault_injection(report):
    misses = []
    total = 0
    for kind, expected in FAULTS.items():
        for seed in range(20):
            sc = random_scenario(1000 + seed, n_businesses=int(3 + seed % 6), n_ratings=12, misbehavior=kind)
            w = execute(sc)
            lines = w.net.log.lines
            found = detect(lines)
            total += 1
            good = (len(found) == 1 and found[0].kind == expected
                    and Evidence.from_dict(found[0].to_dict()).recheck(parse_log(w.net.log.dumps())))
            if not good:
                misses.append((kind, seed, [e.kind for e in found]))
    passed = not misses
    report(4, passed, f"{total - len(misses)}/{total} injections gave exactly one rechecked evidence "
                      f"({', '.join(FAULTS)}); misses: {misses[:3] or 0}")
    assert passed


# 5 -----------------------------------------------------------------------------

def test_criterion_5_determinism_and_replay(report):
    bad = []
    for path in CORPUS:
        sc = load_scenario(path)
        a, b = run(sc), run(sc)
        if a.log_text != b.log_text:
            bad.append((path.stem, "log bytes differ"))
        elif replay(parse_log(a.log_text), sc) != a.report:
            bad.append((path.stem, "replayed report differs"))
    passed = not bad
    report(5, passed, f"{len(CORPUS)} scenarios run twice: byte-identical logs and exact replay; failures: {bad or 0}")
    assert passed


# 6 -----------------------------------------------------------------------------

# five feedback values: (weight, rating), dyadic so exact arithmetic is cheap
GRID = [(Fraction(1), Fraction(0)), (Fraction(2), Fraction(1, 4)), (Fraction(1, 2), Fraction(1, 2)),
        (Fraction(4), Fraction(3, 4)), (Fraction(3, 2), Fraction(1))]
MODELS = ("sum", "mean", "median", "weighted_mean", "beta")


def _brute(model, hist):
    ws = [w for w, _ in hist]
    rs = [r for _, r in hist]
    n = len(rs)
    if model == "sum":
        return sum(w * r for w, r in hist)
    if model == "mean":
        return sum(rs) / n
    if model == "weighted_mean":
        return sum(w * r for w, r in hist) / sum(ws)
    if model == "median":
        # lower median: the smallest value with more than (n-1)//2 ratings at or below it
        return min(v for v in rs if sum(x <= v for x in rs) > (n - 1) // 2)
    pos = sum(r >= Fraction(1, 2) for r in rs)
    return Fraction(pos + 1, n + 2)


def _agree(hist):
    entries = [FeedbackEntry(float(w), float(r)) for w, r in hist]
    return all(aggregate_plain(m, entries) == float(_brute(m, hist)) for m in MODELS)


def _monotone_runs():
    prof = SystemProfile(non_monotonicity=False)
    runs = [load_scenario(SCENARIOS / "monotone.json")]
    runs += [random_scenario(500 + s, n_businesses=4, n_ratings=20, profile=prof) for s in range(5)]
    worst = 0.0
    for sc in runs:
        w = execute(sc)
        per = {}
        for l in w.net.log.lines:
            if l.get("kind") == "reveal":
                per.setdefault(l["votee"], []).append(l["score"])
        for seq in per.values():
            if len(seq) > 1:
                worst = min(worst, float(np.min(np.diff(np.asarray(seq), axis=0))))
    return len(runs), worst


def test_criterion_6_catalog_and_monotone(report):
    exhaustive = bad = 0
    for k in range(1, 7):
        for idx in itertools.product(range(5), repeat=k):
            exhaustive += 1
            bad += not _agree([GRID[i] for i in idx])
    rng = np.random.default_rng(6)
    sampled = 0
    for k in range(7, 11):
        for _ in range(1500):
            sampled += 1
            bad += not _agree([GRID[i] for i in rng.integers(0, 5, k)])
    empty_ok = aggregate_plain("sum", []) == 0.0
    n_runs, worst = _monotone_runs()
    passed = bad == 0 and empty_ok and worst >= 0.0
    report(6, passed, f"{exhaustive} exhaustive (len<=6) + {sampled} sampled (len 7-10) histories x 5 models, "
                      f"{bad} mismatches; {n_runs} monotone runs, largest score drop {max(0.0, -worst):.1e}")
    assert passed


# 7 -----------------------------------------------------------------------------

def test_criterion_7_availability(report):
    ok = total = departs = 0
    for seed in range(12):
        frac = (0.1, 0.25, 0.4, 0.5)[seed % 4]
        sc = random_scenario(700 + seed, n_businesses=int(4 + seed % 7), n_ratings=30,
                             depart_fraction=frac, queries=8)
        w = execute(sc)
        for l in w.net.log.lines:
            if l.get("kind") == "event" and l["type"] == "query":
                total += 1
                ok += l["status"] == "ok"
            departs += l.get("kind") == "event" and l.get("type") == "depart"
    passed = total > 0 and ok == total
    report(7, passed, f"{ok}/{total} queries on rated votees answered across 12 runs with "
                      f"{departs} departures (up to 50% of businesses)")
    assert passed


# 8 -----------------------------------------------------------------------------

def test_criterion_8_bench_cross_check(report):
    rows = {}
    for label, sr in (("with self-rating", [0.3, 0.8]), ("without self-rating", None)):
        events = []
        for _ in range(3):
            events += [{"kind": "contract", "a": "a", "b": "b"},
                       {"kind": "rate", "voter": "a", "votee": "b", "rating": [0.9, 0.4]}]
        sc = Scenario(seed=88, businesses=[BusinessSpec("a", "EU", None), BusinessSpec("b", "EU", sr)],
                      events=events)
        logged = [ops for kind, ops in session_ops(run(sc).log.lines) if kind == "rate"]
        rows[label] = logged[-1]
    passed = rows["with self-rating"] == RATING_OPS and rows["without self-rating"] == RATING_OPS_NO_SELF
    report(8, passed, f"logged steady-state rating ops {rows['with self-rating']} == extrapolate multiset")
    assert passed

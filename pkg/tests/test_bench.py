import dataclasses

import pytest

from conftest import SIM_PARAMS
from repsim.bench import (
    HE_OPS,
    QUERY_OPS,
    RATING_OPS,
    RATING_OPS_NO_SELF,
    OpTiming,
    TimingTable,
    bench_he,
    extrapolate,
    session_ops,
)
from repsim.errors import InvalidParams
from repsim.harness import BusinessSpec, Scenario, run


@pytest.fixture(scope="module")
def table():
    return bench_he(SIM_PARAMS, 100)


def test_table_covers_operations(table):
    names = [r.name for r in table.rows]
    assert set(HE_OPS) <= set(names) and {"sign", "verify"} <= set(names)
    assert table.backend == "simulation"


def test_timings_are_positive_and_ordered(table):
    for r in table.rows:
        assert r.iterations == 100
        assert r.mean > 0 and r.p50 > 0 and r.p95 > 0
        assert r.p50 <= r.p95


def test_rerun_is_within_a_factor_of_three():
    # loose smoke check: short runs on a shared machine jitter
    a, b = bench_he(SIM_PARAMS, 60, seed=1), bench_he(SIM_PARAMS, 60, seed=1)
    for x, y in zip(a.rows, b.rows):
        assert max(x.p50, y.p50) <= 3 * min(x.p50, y.p50) + 20.0


def test_too_few_iterations():
    with pytest.raises(InvalidParams):
        bench_he(SIM_PARAMS, 10)


def test_missing_lattice_is_labelled(monkeypatch):
    monkeypatch.setenv("REPSIM_LATTICE", "0")
    t = bench_he(dataclasses.replace(SIM_PARAMS, backend_kind="lattice"), 30)
    assert t.backend == "simulation" and "simulation-only" in t.label


def test_table_round_trip(table):
    again = TimingTable.from_dict(table.to_dict())
    assert again == table


def test_table_rejects_zero_timing(table):
    d = table.to_dict()
    d["rows"][0]["mean"] = 0.0
    with pytest.raises(InvalidParams):
        TimingTable.from_dict(d)


def _flat(cost):
    rows = [OpTiming(n, 30, c, c, c) for n, c in cost.items()]
    return TimingTable("simulation", SIM_PARAMS, rows)


UNIT = {"keygen": 1.0, "encrypt": 10.0, "decrypt": 5.0, "he_add": 1.0, "he_mul": 20.0,
        "he_scalar": 2.0, "sign": 3.0, "verify": 4.0}


def test_capacity_formula():
    rep = extrapolate(_flat(UNIT), 100, 24)
    cost = sum(UNIT[op] * n for op, n in RATING_OPS.items())
    assert rep.rating_cost_us == pytest.approx(cost)
    assert rep.ratings_per_second == pytest.approx(1e6 / cost)
    assert rep.demand_ratings_per_second == pytest.approx(100 * 24 / 86400)
    assert rep.feasible and not rep.trivial
    q = sum(UNIT[op] * n for op, n in QUERY_OPS["threshold"].items())
    assert rep.queries_per_second == pytest.approx(1e6 / q)


def test_doubling_costs_halves_capacity(table):
    a = extrapolate(table, 10, 5)
    b = extrapolate(table.scaled(2.0), 10, 5)
    assert b.ratings_per_second == pytest.approx(a.ratings_per_second / 2)
    assert b.queries_per_second == pytest.approx(a.queries_per_second / 2)


def test_no_businesses_is_trivially_feasible(table):
    rep = extrapolate(table, 0, 50)
    assert rep.demand_ratings_per_second == 0 and rep.trivial and rep.feasible


def test_overload_names_the_costliest_op():
    rep = extrapolate(_flat(UNIT), 10**9, 10**3)
    assert not rep.feasible
    totals = {op: UNIT[op] * n for op, n in RATING_OPS.items()}
    assert rep.bottleneck == sorted(totals, key=totals.get)[-1] == "he_mul"


def test_report_discloses_formula_and_ops(table):
    rep = extrapolate(table, 10, 5).to_dict()
    assert "1e6 / sum(count[op] * mean_us[op])" in rep["assumptions"]["formula"]
    assert rep["assumptions"]["rating_ops"] == RATING_OPS
    assert rep["assumptions"]["backend"] == "simulation"
    assert "placeholder" in rep["assumptions"]["note"]


def test_negative_inputs(table):
    with pytest.raises(InvalidParams):
        extrapolate(table, -1, 5)


# -- cross-check against a logged session -------------------------------------

def _logged(self_rating, extra=()):
    events = []
    for _ in range(3):
        events += [{"kind": "contract", "a": "a", "b": "b"},
                   {"kind": "rate", "voter": "a", "votee": "b", "rating": [0.9, 0.2]}]
    events += list(extra)
    sc = Scenario(seed=8, businesses=[BusinessSpec("a", "EU", [0.6, 0.6]), BusinessSpec("b", "EU", self_rating)],
                  events=events)
    return session_ops(run(sc).log.lines)


def test_rating_ops_match_logged_session():
    rates = [ops for kind, ops in _logged([0.7, 0.4]) if kind == "rate"]
    # first rating also generates keys; later ones are steady state
    assert rates[0].get("keygen") == 2
    assert rates[1] == rates[2] == RATING_OPS


def test_rating_ops_without_self_rating_match():
    rates = [ops for kind, ops in _logged(None) if kind == "rate"]
    assert rates[1] == rates[2] == RATING_OPS_NO_SELF


def test_query_ops_match_logged_session():
    extra = [{"kind": "query", "requester": "a", "votee": "b", "mode": "encrypted"},
             {"kind": "query", "requester": "a", "votee": "b", "mode": {"threshold": 0.5}}]
    q = [ops for kind, ops in _logged(None, extra) if kind == "query"]
    assert q == [QUERY_OPS["encrypted"], QUERY_OPS["threshold"]]

"""Operation microbenchmarks and a linear capacity projection.

Per-rating and per-query operation counts are the steady-state counts of
a logged session, that is between parties whose keys already exist. The
cross-check test pulls them from a real event log.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from repsim.errors import BackendUnavailable, InvalidParams
from repsim.he import HeParams, LatticeBackend, SimulationBackend
from repsim.signing import Signer, verify_uncached

HE_OPS = ("keygen", "encrypt", "decrypt", "he_add", "he_mul", "he_scalar")
AUX_OPS = ("sign", "verify")
MIN_ITERATIONS = 30

# one rating where the votee answers with a self-rating
RATING_OPS = {"encrypt": 4, "decrypt": 4, "he_mul": 2, "he_add": 4, "sign": 2, "verify": 5}
# votee has no self-rating (or has departed)
RATING_OPS_NO_SELF = {"encrypt": 3, "decrypt": 4, "he_mul": 1, "he_add": 2, "sign": 2, "verify": 5}
QUERY_OPS = {
    "encrypted": {"verify": 1},
    "threshold": {"decrypt": 2, "verify": 1},
}
SECONDS_PER_DAY = 86400.0
PLACEHOLDER_NOTE = "business count and rating rate are caller-supplied placeholders, not measured workloads"


@dataclass
class OpTiming:
    name: str
    iterations: int
    mean: float
    p50: float
    p95: float

    def to_dict(self) -> dict:
        return {"name": self.name, "iterations": self.iterations, "mean": self.mean, "p50": self.p50, "p95": self.p95}


@dataclass
class TimingTable:
    """Timings in microseconds."""

    backend: str
    params: HeParams
    rows: list[OpTiming]
    label: str = ""

    def row(self, name: str) -> OpTiming:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def cost(self, name: str) -> float:
        return self.row(name).mean

    def scaled(self, factor: float) -> "TimingTable":
        rows = [OpTiming(r.name, r.iterations, r.mean * factor, r.p50 * factor, r.p95 * factor) for r in self.rows]
        return TimingTable(self.backend, self.params, rows, self.label)

    def to_dict(self) -> dict:
        return {"unit": "us", "backend": self.backend, "label": self.label,
                "params": self.params.to_dict(), "rows": [r.to_dict() for r in self.rows]}

    @classmethod
    def from_dict(cls, d: dict) -> "TimingTable":
        rows = [OpTiming(**r) for r in d["rows"]]
        for r in rows:
            if r.iterations < MIN_ITERATIONS or not (r.mean > 0 and r.p50 > 0 and r.p95 > 0):
                raise InvalidParams(f"timing row {r.name!r} needs >= {MIN_ITERATIONS} iterations and positive times")
        return cls(d["backend"], HeParams.from_dict(d["params"]), rows, d.get("label", ""))


@dataclass
class CapacityReport:
    ratings_per_second: float
    queries_per_second: float
    demand_ratings_per_second: float
    feasible: bool
    trivial: bool
    bottleneck: str
    rating_cost_us: float
    per_op_cost_us: dict = field(default_factory=dict)
    assumptions: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _stats(name: str, samples_ns: list[int]) -> OpTiming:
    # a timer tick of 0 ns is below clock resolution, not free
    us = np.maximum(np.asarray(samples_ns, dtype=float), 1.0) / 1000.0
    return OpTiming(name, len(us), float(us.mean()), float(np.percentile(us, 50)), float(np.percentile(us, 95)))


def _timed(fn, setups) -> list[int]:
    fn(*setups[0])  # warm-up, untimed
    out = []
    for args in setups:
        t0 = time.perf_counter_ns()
        fn(*args)
        out.append(time.perf_counter_ns() - t0)
    return out


def _backend(params: HeParams, seed: int):
    if params.backend_kind == "lattice":
        try:
            return LatticeBackend(params, seed=seed), "lattice"
        except BackendUnavailable:
            sim = HeParams(params.slot_count, params.depth_budget, params.epsilon, "simulation")
            return SimulationBackend(sim, seed=seed), "simulation-only (lattice backend unavailable)"
    return SimulationBackend(params, seed=seed), "simulation"


def bench_he(params: HeParams, iterations: int = 100, seed: int = 0) -> TimingTable:
    if iterations < MIN_ITERATIONS:
        raise InvalidParams(f"iterations must be >= {MIN_ITERATIONS}, got {iterations}")
    be, label = _backend(params, seed)
    rng = np.random.default_rng(seed)
    km = be.keygen()
    pk, sk, ek = km.public_key, km.secret_key, km.eval_key
    vec = lambda: rng.random(params.slot_count).tolist()  # noqa: E731
    n = iterations
    rows = [_stats("keygen", _timed(be.keygen, [()] * n))]
    rows.append(_stats("encrypt", _timed(be.encrypt, [(pk, vec()) for _ in range(n)])))
    cts = [be.encrypt(pk, vec()) for _ in range(n)]
    rows.append(_stats("decrypt", _timed(be.decrypt, [(sk, c) for c in cts])))
    pairs = [(be.encrypt(pk, vec()), be.encrypt(pk, vec())) for _ in range(n)]
    rows.append(_stats("he_add", _timed(be.add, pairs)))
    rows.append(_stats("he_mul", _timed(be.mul, [(a, b, ek) for a, b in pairs])))
    rows.append(_stats("he_scalar", _timed(be.scalar, [("mul", c, vec()) for c in cts])))
    signer = Signer.from_rng(rng)
    docs = [{"i": i, "v": vec()} for i in range(n)]
    rows.append(_stats("sign", _timed(signer.sign, [(d,) for d in docs])))
    sigs = [(signer.public_key, d, signer.sign(d)) for d in docs]
    rows.append(_stats("verify", _timed(verify_uncached, sigs)))
    return TimingTable(getattr(be, "kind", label), be.params, rows, label)


def _cost(table: TimingTable, ops: dict) -> dict:
    return {op: count * table.cost(op) for op, count in sorted(ops.items())}


def extrapolate(table: TimingTable, n_businesses: int, ratings_per_business_per_day: float,
                self_rating: bool = True) -> CapacityReport:
    if n_businesses < 0 or ratings_per_business_per_day < 0:
        raise InvalidParams("business count and rating rate must be non-negative")
    ops = RATING_OPS if self_rating else RATING_OPS_NO_SELF
    per_op = _cost(table, ops)
    rating_us = math.fsum(per_op.values())
    query_us = math.fsum(_cost(table, QUERY_OPS["threshold"]).values())
    capacity = 1e6 / rating_us
    demand = n_businesses * ratings_per_business_per_day / SECONDS_PER_DAY
    bottleneck = max(per_op, key=lambda op: (per_op[op], op))
    return CapacityReport(
        ratings_per_second=capacity,
        queries_per_second=1e6 / query_us,
        demand_ratings_per_second=demand,
        feasible=demand <= capacity,
        trivial=demand == 0,
        bottleneck=bottleneck,
        rating_cost_us=rating_us,
        per_op_cost_us=per_op,
        assumptions={
            "formula": "ratings_per_second = 1e6 / sum(count[op] * mean_us[op]); "
                       "demand = n_businesses * ratings_per_business_per_day / 86400; "
                       "queries_per_second uses the threshold-query multiset",
            "rating_ops": dict(ops),
            "query_ops": {k: dict(v) for k, v in QUERY_OPS.items()},
            "backend": table.backend,
            "backend_label": table.label,
            "n_businesses": n_businesses,
            "ratings_per_business_per_day": ratings_per_business_per_day,
            "serial": "all work on one critical path, single thread",
            "note": PLACEHOLDER_NOTE,
        },
    )


def session_ops(lines: list[dict]) -> list[tuple[str, dict]]:
    """Crypto ops per event, summed over the messages logged since the previous event."""
    out, cur = [], Counter()
    for l in lines:
        if l.get("kind") == "event":
            out.append((l["type"], dict(sorted(cur.items()))))
            cur = Counter()
        elif l.get("kind") == "msg":
            cur.update(l.get("ops", {}))
    return out

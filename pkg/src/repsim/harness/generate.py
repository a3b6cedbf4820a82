"""Random scenario generation for property tests and the demo corpus."""

from __future__ import annotations

import numpy as np

from repsim.harness.scenario import BusinessSpec, Scenario
from repsim.he import HeParams
from repsim.reputation import SystemProfile


def _vec(rng, dims):
    return [round(float(x), 4) for x in rng.random(dims)]


def random_scenario(seed: int, *, n_businesses: int | None = None, n_ratings: int | None = None,
                    dims: int = 2, profile: SystemProfile | None = None, misbehavior: str | None = None,
                    depart_fraction: float = 0.0, queries: int = 0, engine_count: int = 3,
                    engine_policy: str = "round_robin", he_params: HeParams | None = None) -> Scenario:
    """Contracts and ratings between random pairs, then optional departures and queries.

    ``misbehavior`` marks exactly one rating. Departures happen after two
    thirds of the ratings; queries come last and only target rated votees.
    """
    rng = np.random.default_rng(seed)
    n = n_businesses if n_businesses is not None else int(rng.integers(2, 11))
    m = n_ratings if n_ratings is not None else int(rng.integers(1, 101))
    names = [f"firm{i:02d}" for i in range(n)]
    businesses = [BusinessSpec(name, "EU", _vec(rng, dims) if rng.random() < 0.5 else None) for name in names]
    events, rated = [], []
    departed: set[str] = set()
    faulty = int(rng.integers(m)) if misbehavior else -1
    depart_at = (2 * m) // 3 if depart_fraction > 0 else -1
    for k in range(m):
        if k == depart_at:
            count = int(np.floor(depart_fraction * n))
            for name in rng.choice(names, size=count, replace=False).tolist():
                departed.add(name)
                events.append({"kind": "depart", "business": name})
        alive = [x for x in names if x not in departed]
        pool = alive if len(alive) >= 2 else names
        a, b = (str(x) for x in rng.choice(pool, size=2, replace=False))
        events.append({"kind": "contract", "a": a, "b": b})
        ev = {"kind": "rate", "voter": a, "votee": b, "rating": _vec(rng, dims)}
        if k == faulty:
            ev["misbehavior"] = misbehavior
        events.append(ev)
        rated.append(b)
    requesters = [x for x in names if x not in departed] or names
    for _ in range(queries):
        votee = str(rng.choice(rated))
        requester = str(rng.choice(requesters))
        mode = "encrypted" if rng.random() < 0.5 else {"threshold": round(float(rng.random()), 3)}
        events.append({"kind": "query", "requester": requester, "votee": votee, "mode": mode})
    return Scenario(seed=int(seed), businesses=businesses, events=events,
                    system_profile=profile or SystemProfile(),
                    he_params=he_params or HeParams(slot_count=8, depth_budget=3, epsilon=1e-6),
                    engine_count=engine_count, engine_policy=engine_policy, dimensions=dims,
                    name=f"random-{seed}")

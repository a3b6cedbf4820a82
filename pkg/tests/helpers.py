"""Shared oracles for the test-suite."""

import math

import numpy as np


def random_tree(rng, width, max_mul_depth=2, max_adds=50):
    """Random expression over fresh leaves in [0, 1].

    Multiplicative depth never exceeds ``max_mul_depth`` and the tree holds
    at most ``max_adds`` additions.
    """
    budget = [int(rng.integers(0, max_adds + 1))]

    def build(depth):
        r = rng.random()
        if depth > 0 and r < 0.3:
            return ("mul", build(depth - 1), build(depth - 1))
        if budget[0] > 0 and r < 0.75:
            budget[0] -= 1
            return ("add", build(depth), build(depth))
        return ("leaf", rng.uniform(0.0, 1.0, width))

    return build(max_mul_depth)


def count_ops(tree):
    kind = tree[0]
    if kind == "leaf":
        return {"add": 0, "mul": 0, "depth": 0}
    left, right = count_ops(tree[1]), count_ops(tree[2])
    return {
        "add": left["add"] + right["add"] + (kind == "add"),
        "mul": left["mul"] + right["mul"] + (kind == "mul"),
        "depth": max(left["depth"], right["depth"]) + (kind == "mul"),
    }


def eval_plain(tree):
    kind = tree[0]
    if kind == "leaf":
        return np.asarray(tree[1], dtype=float)
    a, b = eval_plain(tree[1]), eval_plain(tree[2])
    return a + b if kind == "add" else a * b


def eval_encrypted(backend, km, tree):
    kind = tree[0]
    if kind == "leaf":
        return backend.encrypt(km.public_key, list(tree[1]))
    a = eval_encrypted(backend, km, tree[1])
    b = eval_encrypted(backend, km, tree[2])
    return backend.add(a, b) if kind == "add" else backend.mul(a, b, km.eval_key)


def within_bound(decrypted, plain, bound):
    """Decrypted slots lie within ``bound`` of the plaintext oracle.

    A few ulps of slack absorb float rounding in the oracle itself.
    """
    for d, p in zip(decrypted, plain):
        slack = 8 * 2.0 ** -52 * max(1.0, abs(p))
        if not abs(d - p) <= bound * (1 + 1e-12) + slack:
            return False
    return True


def isclose_all(xs, ys, tol):
    return all(math.isclose(x, y, rel_tol=0, abs_tol=tol) for x, y in zip(xs, ys))


# -- plaintext oracle for whole scenarios --------------------------------------

def oracle_scores(scenario):
    """Re-run a clean scenario in 50-digit decimal arithmetic.

    Mirrors the rating rules independently of the protocol code: each rating
    adds w_r * s_r (+ w_e * s_e when the votee is present and has a self
    rating) to N and w_r (+ w_e) to D, with w the current N/D of voter and
    votee, starting from the prior. Exact rationals would be nicer, but their
    denominators grow without bound once weights are themselves quotients.
    """
    from decimal import Context, Decimal, localcontext

    def dec(x):
        return Decimal(repr(float(x)))

    prof = scenario.system_profile
    d = scenario.dimensions
    one, zero = Decimal(1), Decimal(0)
    num, den = {}, {}
    self_rating = {b.name: b.self_rating for b in scenario.businesses}
    departed = set()

    with localcontext(Context(prec=50)):
        prior, pw = dec(prof.prior), dec(prof.prior_weight)

        def score(name):
            if name not in num or any(x == 0 for x in den[name]):
                return [prior] * d
            return [min(one, max(zero, n / q)) for n, q in zip(num[name], den[name])]

        for ev in scenario.events:
            if ev["kind"] == "depart":
                departed.add(ev["business"])
            if ev["kind"] != "rate" or ev["voter"] in departed:
                continue
            voter, votee = ev["voter"], ev["votee"]
            for name in (votee, voter):
                if name not in num:
                    num[name], den[name] = [prior * pw] * d, [pw] * d
            w_r, w_e = score(voter), score(votee)
            se = self_rating[votee] if votee not in departed else None
            for i in range(d):
                num[votee][i] += w_r[i] * dec(ev["rating"][i])
                den[votee][i] += w_r[i]
                if se is not None:
                    num[votee][i] += w_e[i] * dec(se[i])
                    den[votee][i] += w_e[i]
        return {name: [float(x) for x in score(name)] for name in num}

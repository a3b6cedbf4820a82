import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SIM_PARAMS
from repsim.errors import EmptyHistory, EmptyState, KeyMismatch, ScenarioError
from repsim.he import make_backend
from repsim.reputation import (
    FeedbackEntry,
    FeedbackHistory,
    ReputationState,
    SystemProfile,
    aggregate_plain,
    bootstrap_reputation,
    combine_encrypted,
    enforce_profile,
    finalize_score,
    new_state,
    update_state,
)


@pytest.fixture
def be():
    return make_backend(SIM_PARAMS, seed=5)


@pytest.fixture
def keys(be):
    return be.keygen()


def enc(be, km, *vals):
    return be.encrypt(km.public_key, list(vals))


def dec1(be, km, ct):
    return be.decrypt(km.secret_key, ct)[0]


class TestCombine:
    def test_symmetric(self, be, keys):
        s, w = combine_encrypted(be, enc(be, keys, 1.0), enc(be, keys, 0.0), enc(be, keys, 0.5),
                                 enc(be, keys, 0.5), keys.eval_key)
        assert abs(dec1(be, keys, s) - 0.5) <= s.error_bound
        assert abs(dec1(be, keys, w) - 1.0) <= w.error_bound

    def test_no_self_rating(self, be, keys):
        s, w = combine_encrypted(be, enc(be, keys, 0.7), None, enc(be, keys, 1.0), None, keys.eval_key)
        assert abs(dec1(be, keys, s) - 0.7) <= s.error_bound
        assert abs(dec1(be, keys, w) - 1.0) <= w.error_bound

    def test_consumes_one_level(self, be, keys):
        s, _ = combine_encrypted(be, enc(be, keys, 0.7), enc(be, keys, 0.1), enc(be, keys, 1.0),
                                 enc(be, keys, 0.3), keys.eval_key)
        assert s.level == SIM_PARAMS.depth_budget - 1

    def test_key_mismatch(self, be, keys):
        other = be.keygen()
        with pytest.raises(KeyMismatch):
            combine_encrypted(be, enc(be, other, 0.7), None, enc(be, keys, 1.0), None, keys.eval_key)

    def test_random_vs_oracle(self, be, keys):
        rng = random.Random(3)
        for _ in range(1000):
            rr, re_, sr, se = (rng.random() for _ in range(4))
            s, w = combine_encrypted(be, enc(be, keys, sr), enc(be, keys, se), enc(be, keys, rr),
                                     enc(be, keys, re_), keys.eval_key)
            assert abs(dec1(be, keys, s) - (rr * sr + re_ * se)) <= s.error_bound * (1 + 1e-9) + 1e-15
            assert abs(dec1(be, keys, w) - (rr + re_)) <= w.error_bound * (1 + 1e-9) + 1e-15

    @pytest.mark.parametrize("w", [0.25, 0.5, 1.0])
    def test_weight_neutrality(self, be, keys, w):
        s, wt = combine_encrypted(be, enc(be, keys, 0.9), enc(be, keys, 0.3), enc(be, keys, w),
                                  enc(be, keys, w), keys.eval_key)
        assert dec1(be, keys, s) / dec1(be, keys, wt) == pytest.approx(0.6, abs=1e-5)


class TestState:
    def test_empty_state_first_rating(self, be, keys):
        st = new_state(be, keys.public_key, SystemProfile(prior_weight=0.0), dims=1)
        st = update_state(be, st, enc(be, keys, 0.5), enc(be, keys, 1.0))
        assert finalize_score(be, st, keys.secret_key) == [pytest.approx(0.5, abs=1e-5)]
        assert st.version == 1

    def test_two_ratings(self, be, keys):
        st = new_state(be, keys.public_key, SystemProfile(prior_weight=0.0), dims=1)
        for r in (0.8, 0.4):
            st = update_state(be, st, enc(be, keys, r), enc(be, keys, 1.0))
        assert finalize_score(be, st, keys.secret_key)[0] == pytest.approx(0.6, abs=1e-5)

    def test_fifty_random(self, be, keys):
        rng = random.Random(11)
        st = new_state(be, keys.public_key, SystemProfile(), dims=2)
        num, den = [Fraction(1, 2)] * 2, [Fraction(1)] * 2
        for _ in range(50):
            w = rng.random()
            r = [rng.random(), rng.random()]
            s, wt = combine_encrypted(be, enc(be, keys, *r), None, enc(be, keys, w, w), None,
                                      keys.eval_key)
            st = update_state(be, st, s, wt)
            num = [n + Fraction(w) * Fraction(x) for n, x in zip(num, r)]
            den = [d + Fraction(w) for d in den]
        got = finalize_score(be, st, keys.secret_key)
        for g, n, d in zip(got, num, den):
            assert abs(g - float(n / d)) < 1e-3

    def test_direct_formula(self, be, keys):
        st = ReputationState(enc(be, keys, 1.2), enc(be, keys, 2.0), keys.public_key.key_id)
        assert finalize_score(be, st, keys.secret_key)[0] == pytest.approx(0.6, abs=1e-5)

    def test_empty_state(self, be, keys):
        st = new_state(be, keys.public_key, SystemProfile(prior_weight=0.0), dims=2)
        with pytest.raises(EmptyState):
            finalize_score(be, st, keys.secret_key)

    def test_wrong_secret_key(self, be, keys):
        st = new_state(be, keys.public_key, SystemProfile())
        with pytest.raises(KeyMismatch):
            finalize_score(be, st, be.keygen().secret_key)

    def test_update_key_mismatch(self, be, keys):
        other = be.keygen()
        st = new_state(be, keys.public_key, SystemProfile())
        with pytest.raises(KeyMismatch):
            update_state(be, st, enc(be, other, 1, 1), enc(be, keys, 1, 1))

    def test_clamped(self, be, keys):
        st = ReputationState(enc(be, keys, 3.0, -1.0), enc(be, keys, 2.0, 2.0), keys.public_key.key_id)
        assert finalize_score(be, st, keys.secret_key) == [1.0, 0.0]

    def test_roundtrip(self, be, keys):
        st = new_state(be, keys.public_key, SystemProfile())
        assert ReputationState.from_dict(st.to_dict()) == st


class TestBootstrap:
    def test_default(self):
        assert bootstrap_reputation(SystemProfile()) == (0.5, 1.0)

    def test_prior_then_one(self, be, keys):
        st = new_state(be, keys.public_key, SystemProfile(), dims=1)
        st = update_state(be, st, enc(be, keys, 1.0), enc(be, keys, 1.0))
        assert finalize_score(be, st, keys.secret_key)[0] == pytest.approx(0.75, abs=1e-5)

    def test_zero_weight_prior(self, be, keys):
        st = new_state(be, keys.public_key, SystemProfile(prior_weight=0.0), dims=1)
        st = update_state(be, st, enc(be, keys, 0.3), enc(be, keys, 1.0))
        assert finalize_score(be, st, keys.secret_key)[0] == pytest.approx(0.3, abs=1e-5)


def hist(*pairs):
    return FeedbackHistory([FeedbackEntry(w, r) for w, r in pairs])


class TestAggregate:
    def test_mean(self):
        assert aggregate_plain("mean", hist((1, 0.4), (1, 0.6))) == 0.5

    def test_beta(self):
        h = hist((1, 0.9), (1, 0.5), (1, 0.7), (1, 0.1))
        assert aggregate_plain("beta", h) == pytest.approx(4 / 6)

    def test_weighted(self):
        assert aggregate_plain("weighted_mean", hist((1, 0.8), (3, 0.4))) == pytest.approx(0.5)

    def test_lower_median(self):
        assert aggregate_plain("median", hist((1, 0.75), (1, 0.25), (1, 1.0), (1, 0.5))) == 0.5

    @pytest.mark.parametrize("model", ["mean", "median", "beta", "weighted_mean"])
    def test_empty(self, model):
        with pytest.raises(EmptyHistory):
            aggregate_plain(model, FeedbackHistory())

    def test_zero_weight(self):
        with pytest.raises(EmptyHistory):
            aggregate_plain("weighted_mean", hist((0, 0.5)))

    def test_sum_empty(self):
        assert aggregate_plain("sum", FeedbackHistory()) == 0.0

    def test_vector(self):
        h = hist((1, (0.2, 1.0)), (1, (0.4, 0.0)))
        assert aggregate_plain("mean", h) == pytest.approx([0.3, 0.5])

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            aggregate_plain("mode", hist((1, 0.5)))

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            FeedbackHistory().append(-1, 0.5)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from([0.25, 0.5, 1.0, 2.0, 4.0]),
                              st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0])), min_size=1, max_size=10))
    def test_exact_brute_force(self, pairs):
        h = hist(*pairs)
        exact_sum = sum(Fraction(w) * Fraction(r) for w, r in pairs)
        assert aggregate_plain("sum", h) == float(exact_sum)
        assert aggregate_plain("mean", h) == float(sum(Fraction(r) for _, r in pairs) / len(pairs))
        rs = [r for _, r in pairs]
        assert aggregate_plain("median", h) in rs
        assert sum(r < aggregate_plain("median", h) for r in rs) <= (len(rs) - 1) // 2


class TestEnforce:
    def test_monotonic_clamp(self):
        d = enforce_profile(SystemProfile(non_monotonicity=False), 0.7, 0.6, 0.2)
        assert (d.outcome, d.score) == ("adjusted", 0.7)

    def test_liveliness_reject(self):
        assert enforce_profile(SystemProfile(liveliness=False), 0.7, 0.6, 0.2).outcome == "reject"

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_permissive(self, old, new, fb):
        d = enforce_profile(SystemProfile(), old, new, fb)
        assert (d.outcome, d.score) == ("accept", new)

    def test_vector_clamp(self):
        d = enforce_profile(SystemProfile(non_monotonicity=False), [0.5, 0.5], [0.6, 0.4], [1, 0])
        assert (d.outcome, d.score) == ("adjusted", [0.6, 0.5])

    def test_monotone_sequence(self):
        p = SystemProfile(non_monotonicity=False)
        rng = random.Random(2)
        score, seq = 0.5, []
        for _ in range(100):
            score = enforce_profile(p, score, rng.random(), rng.random()).score
            seq.append(score)
        assert all(a <= b for a, b in itertools.pairwise(seq))


class TestProfile:
    def test_local_rejected(self):
        with pytest.raises(ScenarioError, match="system_profile.visibility"):
            SystemProfile.from_dict({"visibility": "local"})

    def test_unknown_model_path(self):
        with pytest.raises(ScenarioError, match="system_profile.aggregation_model"):
            SystemProfile.from_dict({"aggregation_model": "vote"})

    def test_type_check(self):
        with pytest.raises(ScenarioError, match="liveliness"):
            SystemProfile.from_dict({"liveliness": "yes"})

    def test_roundtrip(self):
        p = SystemProfile(non_monotonicity=False, prior=0.4)
        assert SystemProfile.from_dict(p.to_dict()) == p

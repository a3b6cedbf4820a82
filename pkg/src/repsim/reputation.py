"""Reputation algebra over encrypted state, plus the plaintext aggregation catalog.

A votee's reputation is the encrypted pair ``(N, D)``: a per-dimension
weighted sum of ratings and the matching sum of weights. Division happens
only at decryption time (:func:`finalize_score`). One rating contributes

    S = R_r * S_r + R_e * S_e        W = R_r + R_e

where ``S_r`` is the voter's rating, ``S_e`` the votee's optional self-rating
and ``R_r``/``R_e`` the current scores of voter and votee used as weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Sequence, Union

from repsim.errors import EmptyHistory, EmptyState, KeyMismatch, ScenarioError
from repsim.he import Ciphertext, EvalKey, HeBackend, PublicKey, SecretKey

AGGREGATION_MODELS = ("sum", "mean", "median", "weighted_mean", "beta")
DEFAULT_DIMENSIONS = 2
NEGATIVE_THRESHOLD = 0.5

Rating = Union[float, Sequence[float]]


def check_rating(values: Sequence[float], dims: int | None = None) -> list[float]:
    vals = [float(v) for v in values]
    if dims is not None and len(vals) != dims:
        raise ValueError(f"rating has {len(vals)} dimensions, expected {dims}")
    if not all(0.0 <= v <= 1.0 for v in vals):
        raise ValueError(f"rating components must lie in [0, 1]: {vals}")
    return vals


# -- system profile ----------------------------------------------------------

_ENUMS = {
    "architecture": ("centralized", "decentralized", "hybrid"),
    "granularity": ("single", "multiple"),
    "visibility": ("global", "local"),
    "aggregation_model": AGGREGATION_MODELS,
    "threshold_aggregate": ("mean", "min"),
}


@dataclass(frozen=True)
class SystemProfile:
    """Property axes of a reputation system, keyed like the comparison table columns."""

    architecture: str = "centralized"
    feedback_set: str = "[0,1]"
    granularity: str = "multiple"
    liveliness: bool = True
    visibility: str = "global"
    durability: bool = True
    non_monotonicity: bool = True
    aggregation_model: str = "weighted_mean"
    prior: float = 0.5
    prior_weight: float = 1.0
    threshold_aggregate: str = "mean"

    def __post_init__(self):
        for name, allowed in _ENUMS.items():
            if getattr(self, name) not in allowed:
                raise ScenarioError(f"unknown value {getattr(self, name)!r}; expected one of {allowed}",
                                    path=name)
        if self.visibility == "local":
            raise ScenarioError("visibility=local (per-requester answers) is not supported",
                                path="visibility")
        if not 0.0 <= self.prior <= 1.0:
            raise ScenarioError("prior must lie in [0, 1]", path="prior")
        if self.prior_weight < 0:
            raise ScenarioError("prior_weight must be non-negative", path="prior_weight")

    @classmethod
    def from_dict(cls, d: dict, path: str = "system_profile") -> "SystemProfile":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in d.items():
            if key not in known:
                raise ScenarioError(f"unknown key {key!r}", path=f"{path}.{key}")
            default = known[key].default
            if isinstance(default, bool) and not isinstance(value, bool):
                raise ScenarioError("expected a boolean", path=f"{path}.{key}")
            if isinstance(default, float) and not isinstance(value, (int, float)):
                raise ScenarioError("expected a number", path=f"{path}.{key}")
            if isinstance(default, str) and not isinstance(value, str):
                raise ScenarioError("expected a string", path=f"{path}.{key}")
            kwargs[key] = float(value) if isinstance(default, float) else value
        try:
            return cls(**kwargs)
        except ScenarioError as exc:
            raise ScenarioError(str(exc).split(": ", 1)[-1], path=f"{path}.{exc.path}") from None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def permissive(self) -> bool:
        return self.liveliness and self.non_monotonicity


def bootstrap_reputation(profile: SystemProfile) -> tuple[float, float]:
    """Newcomer prior ``(value, weight)`` folded into ``N``/``D`` at state creation."""
    return profile.prior, profile.prior_weight


# -- encrypted state ---------------------------------------------------------

@dataclass(frozen=True)
class ReputationState:
    numerator: Ciphertext
    denominator: Ciphertext
    votee_key_id: str
    version: int = 0

    def to_dict(self) -> dict:
        return {
            "numerator": self.numerator.to_dict(),
            "denominator": self.denominator.to_dict(),
            "votee_key_id": self.votee_key_id,
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReputationState":
        return cls(Ciphertext.from_dict(d["numerator"]), Ciphertext.from_dict(d["denominator"]),
                   d["votee_key_id"], int(d["version"]))


def new_state(backend: HeBackend, pk: PublicKey, profile: SystemProfile,
              dims: int = DEFAULT_DIMENSIONS) -> ReputationState:
    prior, weight = bootstrap_reputation(profile)
    n = backend.encrypt(pk, [prior * weight] * dims)
    d = backend.encrypt(pk, [weight] * dims)
    return ReputationState(n, d, pk.key_id, 0)


def combine_encrypted(backend: HeBackend, s_r: Ciphertext, s_e: Ciphertext | None,
                      r_r: Ciphertext, r_e: Ciphertext | None,
                      ek: EvalKey) -> tuple[Ciphertext, Ciphertext]:
    """Weight the voter's and the votee's ratings by their current scores."""
    s = backend.mul(r_r, s_r, ek)
    if s_e is None:
        return s, r_r
    if r_e is None:
        raise ValueError("a self-rating needs the votee's score as weight")
    s = backend.add(s, backend.mul(r_e, s_e, ek))
    return s, backend.add(r_r, r_e)


def update_state(backend: HeBackend, st: ReputationState, s: Ciphertext,
                 w: Ciphertext) -> ReputationState:
    if s.key_id != st.votee_key_id or w.key_id != st.votee_key_id:
        raise KeyMismatch("update is not under the votee's key")
    return ReputationState(backend.add(st.numerator, s), backend.add(st.denominator, w),
                           st.votee_key_id, st.version + 1)


def finalize_score(backend: HeBackend, st: ReputationState, sk: SecretKey) -> list[float]:
    if sk.key_id != st.votee_key_id:
        raise KeyMismatch(f"secret key {sk.key_id} does not belong to this state")
    num = backend.decrypt(sk, st.numerator)
    den = backend.decrypt(sk, st.denominator)
    return score_from(num, den, st.denominator.error_bound)


def score_from(num: Sequence[float], den: Sequence[float], den_bound: float = 0.0) -> list[float]:
    if any(d <= den_bound or d <= 0.0 for d in den):
        raise EmptyState("no weight accumulated yet")
    return [min(1.0, max(0.0, n / d)) for n, d in zip(num, den)]


# -- plaintext catalog -------------------------------------------------------

@dataclass(frozen=True)
class FeedbackEntry:
    weight: float
    rating: Rating
    timestamp: int = 0


@dataclass
class FeedbackHistory:
    entries: list[FeedbackEntry] = field(default_factory=list)

    def append(self, weight: float, rating: Rating, timestamp: int = 0) -> None:
        if weight < 0:
            raise ValueError("weights are non-negative")
        self.entries.append(FeedbackEntry(weight, rating, timestamp))

    def __len__(self):
        return len(self.entries)


def _scalar_aggregate(model: str, pairs: list[tuple[float, float]]) -> float:
    if model == "sum":
        return math.fsum(w * r for w, r in pairs)
    if not pairs:
        raise EmptyHistory(f"{model} is undefined on an empty history")
    ratings = [r for _, r in pairs]
    if model == "mean":
        return math.fsum(ratings) / len(ratings)
    if model == "median":
        return sorted(ratings)[(len(ratings) - 1) // 2]
    if model == "weighted_mean":
        total = math.fsum(w for w, _ in pairs)
        if total <= 0:
            raise EmptyHistory("weighted mean needs positive total weight")
        return math.fsum(w * r for w, r in pairs) / total
    if model == "beta":
        pos = sum(1 for r in ratings if r >= NEGATIVE_THRESHOLD)
        neg = len(ratings) - pos
        return (pos + 1) / (pos + neg + 2)
    raise ValueError(f"unknown aggregation model {model!r}")


def aggregate_plain(model: str, history: FeedbackHistory | Sequence[FeedbackEntry]):
    """Aggregate a feedback history; vector ratings aggregate per dimension."""
    entries = history.entries if isinstance(history, FeedbackHistory) else list(history)
    if model not in AGGREGATION_MODELS:
        raise ValueError(f"unknown aggregation model {model!r}")
    if entries and not isinstance(entries[0].rating, (int, float)):
        dims = len(entries[0].rating)
        return [_scalar_aggregate(model, [(e.weight, float(e.rating[i])) for e in entries])
                for i in range(dims)]
    return _scalar_aggregate(model, [(e.weight, float(e.rating)) for e in entries])


@dataclass(frozen=True)
class Decision:
    outcome: str  # accept | reject | adjusted
    score: Rating


def _mean(x: Rating) -> float:
    return float(x) if isinstance(x, (int, float)) else math.fsum(x) / len(x)


def is_negative(feedback: Rating) -> bool:
    return _mean(feedback) < NEGATIVE_THRESHOLD


def enforce_profile(profile: SystemProfile, old_score: Rating, new_score: Rating,
                    feedback: Rating) -> Decision:
    if not profile.liveliness and is_negative(feedback):
        return Decision("reject", old_score)
    if not profile.non_monotonicity:
        if isinstance(new_score, (int, float)):
            if new_score < old_score:
                return Decision("adjusted", old_score)
        else:
            if any(n < o for n, o in zip(new_score, old_score)):
                return Decision("adjusted", [max(n, o) for n, o in zip(new_score, old_score)])
    return Decision("accept", new_score)

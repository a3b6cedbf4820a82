"""Shared types for the homomorphic layer and the backend interface."""

from __future__ import annotations

import base64
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from repsim.errors import InvalidParams, KeyMismatch, LengthMismatch, VectorTooLong

BACKEND_KINDS = ("simulation", "lattice")


@dataclass(frozen=True)
class HeParams:
    slot_count: int = 8
    depth_budget: int = 2
    epsilon: float = 1e-6
    backend_kind: str = "simulation"

    def __post_init__(self):
        if not isinstance(self.slot_count, int) or self.slot_count < 1:
            raise InvalidParams(f"slot_count must be a positive integer, got {self.slot_count!r}")
        if not isinstance(self.depth_budget, int) or self.depth_budget < 2:
            raise InvalidParams(f"depth_budget must be >= 2, got {self.depth_budget!r}")
        if not (isinstance(self.epsilon, (int, float)) and math.isfinite(self.epsilon)) or self.epsilon < 0:
            raise InvalidParams(f"epsilon must be a finite non-negative real, got {self.epsilon!r}")
        if self.backend_kind not in BACKEND_KINDS:
            raise InvalidParams(f"backend_kind must be one of {BACKEND_KINDS}, got {self.backend_kind!r}")

    def to_dict(self) -> dict:
        return {
            "slot_count": self.slot_count,
            "depth_budget": self.depth_budget,
            "epsilon": float(self.epsilon),
            "backend_kind": self.backend_kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HeParams":
        return cls(
            slot_count=d.get("slot_count", 8),
            depth_budget=d.get("depth_budget", 2),
            epsilon=d.get("epsilon", 1e-6),
            backend_kind=d.get("backend_kind", "simulation"),
        )


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"), validate=True)


@dataclass(frozen=True)
class _Key:
    key_id: str
    data: bytes = field(repr=False)

    def to_dict(self) -> dict:
        return {"key_id": self.key_id, "data": _b64(self.data)}

    @classmethod
    def from_dict(cls, d: dict):
        return cls(key_id=d["key_id"], data=_unb64(d["data"]))


class PublicKey(_Key):
    pass


class SecretKey(_Key):
    pass


class EvalKey(_Key):
    pass


@dataclass(frozen=True)
class KeyMaterial:
    key_id: str
    public_key: PublicKey
    secret_key: SecretKey = field(repr=False)
    eval_key: EvalKey = field(repr=False)


@dataclass(frozen=True)
class Ciphertext:
    """Opaque homomorphic payload plus its public accounting fields."""

    key_id: str
    level: int
    error_bound: float
    payload: bytes = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "key_id": self.key_id,
            "level": self.level,
            "error_bound": self.error_bound,
            "payload": _b64(self.payload),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Ciphertext":
        return cls(
            key_id=d["key_id"],
            level=int(d["level"]),
            error_bound=float(d["error_bound"]),
            payload=_unb64(d["payload"]),
        )


def noise_report(ct: Ciphertext) -> dict:
    return {"level": ct.level, "error_bound": ct.error_bound}


def check_plain(values: Sequence[float], slot_count: int) -> list[float]:
    vals = [float(v) for v in values]
    if len(vals) > slot_count:
        raise VectorTooLong(f"vector of length {len(vals)} exceeds slot_count={slot_count}")
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("plaintext values must be finite")
    return vals


def same_key(*key_ids: str) -> str:
    first = key_ids[0]
    for k in key_ids[1:]:
        if k != first:
            raise KeyMismatch(f"key {k} does not match {first}")
    return first


class HeBackend:
    """Interface every backend implements.

    Evaluation (``add``/``mul``/``scalar``) is deterministic in the inputs;
    only ``keygen`` and ``encrypt`` draw from the seeded generator. The
    auditor relies on this to recompute an engine's output from the log.
    """

    kind = "abstract"

    def __init__(self, params: HeParams):
        self.params = params
        self.counter: Counter = Counter()

    # every backend implements these
    def keygen(self) -> KeyMaterial:
        raise NotImplementedError

    def encrypt(self, pk: PublicKey, values: Sequence[float]) -> Ciphertext:
        raise NotImplementedError

    def decrypt(self, sk: SecretKey, ct: Ciphertext) -> list[float]:
        raise NotImplementedError

    def add(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        raise NotImplementedError

    def mul(self, a: Ciphertext, b: Ciphertext, ek: EvalKey) -> Ciphertext:
        raise NotImplementedError

    def scalar(self, op: str, a: Ciphertext, plain: Sequence[float]) -> Ciphertext:
        raise NotImplementedError

    def import_eval_key(self, pk: PublicKey, ek: EvalKey) -> None:
        """Make a foreign key usable for evaluation (e.g. by an auditor)."""

    def noise_report(self, ct: Ciphertext) -> dict:
        return noise_report(ct)

    def _check_scalar(self, op: str, used: int, plain: Sequence[float]) -> list[float]:
        if op not in ("add", "mul"):
            raise ValueError(f"unknown scalar op {op!r}")
        vals = [float(v) for v in plain]
        if len(vals) != used:
            raise LengthMismatch(f"plain vector has {len(vals)} slots, ciphertext uses {used}")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("plaintext values must be finite")
        return vals

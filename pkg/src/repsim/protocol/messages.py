"""Wire messages, rating receipts and engine assignment."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from repsim.errors import MalformedMessage, NoEngines
from repsim.signing import verify

# rating path, query path, and the extra plumbing variants this artifact adds
VARIANTS = (
    "KeyRequest", "KeyResponse", "RepRequest", "RepResponse", "RatingSubmission",
    "SelfRatingRequest", "SelfRatingResponse", "SignedRating", "ReputationUpdate",
    "QueryRequest", "QueryResponse", "ThresholdRequest", "ThresholdResponse",
    "TranscryptRequest", "TranscryptResponse",
    "SpendRequest", "SpendResponse", "TokenMint", "ProfileCheck", "ProfileResult",
    "Error", "Undeliverable",
)

# fixed roles; businesses are addressed by pseudonym handles
AUTHORITY = "authority"
KEY_MANAGER = "km"
REPUTATION_MANAGER = "rm"
NETWORK = "network"


@dataclass
class Message:
    variant: str
    sender: str
    receiver: str
    session_id: str
    payload: dict = field(default_factory=dict)
    ops: dict = field(default_factory=dict)  # crypto work the sender did to produce it

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise MalformedMessage(f"unknown variant {self.variant!r}")

    def to_dict(self) -> dict:
        return {"variant": self.variant, "sender": self.sender, "receiver": self.receiver,
                "session_id": self.session_id, "payload": self.payload, "ops": self.ops}

    @classmethod
    def from_dict(cls, d: dict) -> "Message":
        try:
            return cls(d["variant"], d["sender"], d["receiver"], d["session_id"],
                       d.get("payload", {}), d.get("ops", {}))
        except KeyError as exc:
            raise MalformedMessage(f"message lacks {exc}") from None

    def field(self, name: str):
        try:
            return self.payload[name]
        except (KeyError, TypeError):
            raise MalformedMessage(f"{self.variant} payload lacks {name!r}") from None


# -- receipts ----------------------------------------------------------------

@dataclass(frozen=True)
class RatingReceipt:
    """What an engine signs: the combined update and where it applies."""

    session_id: str
    s: dict
    w: dict
    votee: str
    version: int
    engine: str = ""
    signature: str = field(default="", repr=False)

    def signed_part(self) -> dict:
        return {"S": self.s, "W": self.w, "session_id": self.session_id,
                "votee": self.votee, "version": self.version}

    def to_dict(self) -> dict:
        return {**self.signed_part(), "engine": self.engine, "signature": self.signature}

    @classmethod
    def from_dict(cls, d: dict) -> "RatingReceipt":
        try:
            return cls(d["session_id"], d["S"], d["W"], d["votee"], int(d["version"]),
                       d.get("engine", ""), d["signature"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedMessage(f"bad receipt: {exc}") from None


@dataclass(frozen=True)
class Evidence:
    kind: str  # BadSignature | ReplayedToken | ReplayedTicket | TamperedUpdate | DepthViolation
    messages: tuple
    note: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "messages": list(self.messages), "note": self.note}

    @classmethod
    def from_dict(cls, d: dict) -> "Evidence":
        return cls(d["kind"], tuple(d["messages"]), d.get("note", ""))

    def recheck(self, log) -> bool:
        """Re-derive this finding from the event log alone."""
        from repsim.protocol.evidence import recheck
        return recheck(self, log)


EVIDENCE_KINDS = ("BadSignature", "ReplayedToken", "ReplayedTicket", "TamperedUpdate", "DepthViolation")


def verify_receipt(r: RatingReceipt, engine_pub: str):
    if verify(engine_pub, r.signed_part(), r.signature):
        return "ok"
    return Evidence("BadSignature", (), f"receipt for session {r.session_id} does not verify")


# -- engine assignment -------------------------------------------------------

class EnginePool:
    """Picks an engine per rating, by rotation or by a seeded draw."""

    def __init__(self, engines: list[str], policy: str = "round_robin", seed: int = 0):
        if policy not in ("round_robin", "random"):
            raise ValueError(f"unknown engine policy {policy!r}")
        self.engines = list(engines)
        self.policy = policy
        self._rng = np.random.default_rng(seed)
        self._next = 0
        self.public_keys: dict[str, str] = {}

    def assign(self) -> str:
        return assign_engine(self)


def assign_engine(pool: EnginePool) -> str:
    if not pool.engines:
        raise NoEngines("no reputation engine available")
    if pool.policy == "round_robin":
        choice = pool.engines[pool._next % len(pool.engines)]
        pool._next += 1
        return choice
    return pool.engines[int(pool._rng.integers(len(pool.engines)))]


def payload_bytes(m: Message) -> bytes:
    return json.dumps(m.payload, sort_keys=True, separators=(",", ":")).encode()

"""Registration, pseudonyms, contract-backed voting tickets and access tokens.

The :class:`Authority` is the only place that knows which pseudonym belongs
to which business. It issues two kinds of pseudonym:

* a *standing* pseudonym per business, fixed at registration, under which
  the business is rated (its reputation record and FHE key are filed under it);
* *temporary* pseudonyms, valid for a window of epochs, used when the
  business acts as voter or requester.

Tickets are issued on contract events, one per rating direction, and can be
spent once. Access tokens are one-time handles on a voter's reputation
record; the :class:`TokenRegistry` that redeems them lives with the
reputation manager.

All mutating operations take the authority's lock, so concurrent spend or
redeem attempts serialise and exactly one wins.
"""

from __future__ import annotations

import hashlib
import threading
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from repsim.errors import (
    AlreadyRedeemed,
    AlreadySpent,
    DuplicateRegistration,
    ExpiredPseudonym,
    InvalidPseudonym,
    SelfContract,
    TicketExpired,
    UnknownBusiness,
    UnknownTicket,
    UnknownToken,
)
from repsim.signing import Signer, canonical, verify

DEFAULT_EPOCH_LENGTH = 100
DEFAULT_TICKET_WINDOW = 1000
DEFAULT_PSEUDONYM_LIFETIME = 10  # epochs


@dataclass(frozen=True)
class BusinessId:
    id: str
    jurisdiction: str = ""


@dataclass(frozen=True)
class Pseudonym:
    handle: str
    epoch: int
    authority_signature: str = field(repr=False)
    standing: bool = False

    def signed_part(self) -> dict:
        return {"handle": self.handle, "epoch": self.epoch, "standing": self.standing}

    def to_dict(self) -> dict:
        return {**self.signed_part(), "authority_signature": self.authority_signature}

    @classmethod
    def from_dict(cls, d: dict) -> "Pseudonym":
        return cls(d["handle"], int(d["epoch"]), d["authority_signature"], bool(d.get("standing", False)))


def check_pseudonym(p: Pseudonym, authority_key: str, current_epoch: int,
                    lifetime: int = DEFAULT_PSEUDONYM_LIFETIME) -> None:
    """Raise unless ``p`` carries a valid authority signature and is unexpired."""
    if not verify(authority_key, p.signed_part(), p.authority_signature):
        raise InvalidPseudonym(f"bad authority signature on {p.handle}")
    if not p.standing and not (p.epoch <= current_epoch < p.epoch + lifetime):
        raise ExpiredPseudonym(f"{p.handle} issued in epoch {p.epoch}, now {current_epoch}")


@dataclass
class VotingTicket:
    ticket_id: str
    voter_pseudonym: str
    votee_pseudonym: str
    contract_digest: str
    issued_at: int
    spent: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SessionAuthorization:
    """Proof that a ticket was spent; names the votee but not the voter."""

    ticket_id: str
    votee_pseudonym: str
    contract_digest: str
    spent_at: int
    signature: str = field(repr=False)

    def signed_part(self) -> dict:
        return {
            "ticket_id": self.ticket_id,
            "votee_pseudonym": self.votee_pseudonym,
            "contract_digest": self.contract_digest,
            "spent_at": self.spent_at,
        }

    def to_dict(self) -> dict:
        return {**self.signed_part(), "signature": self.signature}

    @classmethod
    def from_dict(cls, d: dict) -> "SessionAuthorization":
        return cls(d["ticket_id"], d["votee_pseudonym"], d["contract_digest"], int(d["spent_at"]),
                   d["signature"])

    def verify(self, authority_key: str) -> bool:
        return verify(authority_key, self.signed_part(), self.signature)


@dataclass
class AccessToken:
    token_id: str
    bound_reputation_ref: str
    redeemed: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ContractEvent:
    party_a: BusinessId
    party_b: BusinessId
    metadata: dict = field(default_factory=dict)
    timestamp: int = 0

    def __post_init__(self):
        if self.party_a.id == self.party_b.id:
            raise SelfContract(f"{self.party_a.id} cannot contract with itself")

    def digest(self) -> str:
        body = {"a": self.party_a.id, "b": self.party_b.id, "metadata": self.metadata,
                "timestamp": self.timestamp}
        return hashlib.sha256(canonical(body)).hexdigest()


class TokenRegistry:
    """One-time tokens bound to reputation records.

    Every token gets its own opaque alias for the record, so two tokens for
    the same voter never share a visible reference.
    """

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._lock = threading.Lock()
        self._tokens: dict[str, AccessToken] = {}
        self._refs: dict[str, str] = {}

    def mint(self, record_key: str) -> AccessToken:
        with self._lock:
            token = AccessToken("tok:" + self._rng.bytes(16).hex(), "ref:" + self._rng.bytes(16).hex())
            self._tokens[token.token_id] = token
            self._refs[token.bound_reputation_ref] = record_key
            return AccessToken(token.token_id, token.bound_reputation_ref)

    def redeem(self, token_id: str) -> str:
        with self._lock:
            token = self._tokens.get(token_id)
            if token is None:
                raise UnknownToken(token_id)
            if token.redeemed:
                raise AlreadyRedeemed(token_id)
            token.redeemed = True
            return token.bound_reputation_ref

    def resolve(self, ref: str) -> str:
        return self._refs[ref]

    def outstanding(self) -> list[dict]:
        return [t.to_dict() for t in self._tokens.values()]


class Authority:
    """Merged pseudonym authority and ticket issuer."""

    def __init__(self, seed: int | None = 0, *, epoch_length: int = DEFAULT_EPOCH_LENGTH,
                 ticket_window: int = DEFAULT_TICKET_WINDOW,
                 pseudonym_lifetime: int = DEFAULT_PSEUDONYM_LIFETIME,
                 token_registry: TokenRegistry | None = None):
        self._rng = np.random.default_rng(seed)
        self._signer = Signer.from_rng(self._rng)
        self.public_key = self._signer.public_key
        self.epoch_length = epoch_length
        self.ticket_window = ticket_window
        self.pseudonym_lifetime = pseudonym_lifetime
        self.tokens = token_registry or TokenRegistry(np.random.default_rng(self._rng.integers(2**63)))
        self.tick = 0
        self.ops: Counter = Counter()  # signatures made and checked
        self._lock = threading.Lock()
        self._by_legal: dict[str, BusinessId] = {}
        self._legal: dict[str, str] = {}
        self._standing: dict[str, Pseudonym] = {}
        self._owner: dict[str, str] = {}          # pseudonym handle -> business id (secret)
        self._pseudonyms: dict[str, Pseudonym] = {}
        self._tickets: dict[str, VotingTicket] = {}
        self._ticket_contract: dict[str, str] = {}

    # -- clock ---------------------------------------------------------------

    @property
    def epoch(self) -> int:
        return self.tick // self.epoch_length

    def advance(self, ticks: int = 1) -> None:
        self.tick += ticks

    def advance_epoch(self) -> None:
        self.tick = (self.epoch + 1) * self.epoch_length

    # -- registration and pseudonyms -----------------------------------------

    def _fresh(self, prefix: str, nbytes: int, taken) -> str:
        while True:
            value = prefix + self._rng.bytes(nbytes).hex()
            if value not in taken:
                return value

    def register_business(self, legal_identity: str, jurisdiction: str = "") -> BusinessId:
        with self._lock:
            if legal_identity in self._by_legal:
                raise DuplicateRegistration(legal_identity)
            bid = BusinessId(self._fresh("biz:", 8, self._legal), jurisdiction)
            self._by_legal[legal_identity] = bid
            self._legal[bid.id] = legal_identity
            self._standing[bid.id] = self._make_pseudonym(bid, self.epoch, standing=True)
            return bid

    def _make_pseudonym(self, b: BusinessId, epoch: int, standing: bool) -> Pseudonym:
        handle = self._fresh("ps:", 16, self._owner)
        body = {"handle": handle, "epoch": epoch, "standing": standing}
        p = Pseudonym(handle, epoch, self._signer.sign(body), standing)
        self.ops["sign"] += 1
        self._owner[handle] = b.id
        self._pseudonyms[handle] = p
        return p

    def _known(self, b: BusinessId) -> None:
        if b.id not in self._legal:
            raise UnknownBusiness(b.id)

    def standing_pseudonym(self, b: BusinessId) -> Pseudonym:
        self._known(b)
        return self._standing[b.id]

    def issue_pseudonym(self, b: BusinessId, epoch: int | None = None) -> Pseudonym:
        with self._lock:
            self._known(b)
            return self._make_pseudonym(b, self.epoch if epoch is None else epoch, standing=False)

    def check(self, p: Pseudonym) -> None:
        self.ops["verify"] += 1
        check_pseudonym(p, self.public_key, self.epoch, self.pseudonym_lifetime)

    def lookup(self, handle: str) -> Pseudonym:
        try:
            return self._pseudonyms[handle]
        except KeyError:
            raise InvalidPseudonym(f"unknown pseudonym {handle}") from None

    def is_standing(self, handle: str) -> bool:
        """Public directory lookup: is ``handle`` some business's standing pseudonym?"""
        p = self._pseudonyms.get(handle)
        return p is not None and p.standing

    # -- tickets -------------------------------------------------------------

    def establish_contract(self, e: ContractEvent) -> tuple[VotingTicket, VotingTicket]:
        with self._lock:
            self._known(e.party_a)
            self._known(e.party_b)
            digest = e.digest()
            tickets = []
            for voter, votee in ((e.party_a, e.party_b), (e.party_b, e.party_a)):
                voter_p = self._make_pseudonym(voter, self.epoch, standing=False)
                t = VotingTicket(self._fresh("tkt:", 12, self._tickets), voter_p.handle,
                                 self._standing[votee.id].handle, digest, e.timestamp)
                self._tickets[t.ticket_id] = t
                self._ticket_contract[t.ticket_id] = digest
                tickets.append(VotingTicket(**t.to_dict()))
            return tickets[0], tickets[1]

    def spend_ticket(self, t: VotingTicket | str) -> SessionAuthorization:
        ticket_id = t if isinstance(t, str) else t.ticket_id
        with self._lock:
            record = self._tickets.get(ticket_id)
            if record is None:
                raise UnknownTicket(ticket_id)
            if record.spent:
                raise AlreadySpent(ticket_id)
            self.check(self._pseudonyms[record.voter_pseudonym])
            if self.tick - record.issued_at > self.ticket_window:
                raise TicketExpired(f"{ticket_id} issued at {record.issued_at}, now {self.tick}")
            record.spent = True
            if not isinstance(t, str):
                t.spent = True
            body = {"ticket_id": ticket_id, "votee_pseudonym": record.votee_pseudonym,
                    "contract_digest": record.contract_digest, "spent_at": self.tick}
            self.ops["sign"] += 1
            return SessionAuthorization(**body, signature=self._signer.sign(body))

    def ticket(self, ticket_id: str) -> VotingTicket:
        return VotingTicket(**self._tickets[ticket_id].to_dict())

    # -- access tokens -------------------------------------------------------

    def mint_access_token(self, voter_pseudonym: str | Pseudonym) -> AccessToken:
        handle = voter_pseudonym if isinstance(voter_pseudonym, str) else voter_pseudonym.handle
        with self._lock:
            p = self.lookup(handle)
            self.check(p)
            record = self._standing[self._owner[handle]].handle
        return self.tokens.mint(record)

    def redeem_access_token(self, t: AccessToken | str) -> str:
        token_id = t if isinstance(t, str) else t.token_id
        ref = self.tokens.redeem(token_id)
        if not isinstance(t, str):
            t.redeemed = True
        return ref

    # -- secrets -------------------------------------------------------------

    def owner_of(self, handle: str) -> str:
        return self._owner[handle]

    def snapshot(self) -> dict:
        """Authority state; the ``secret`` section is for the auditor only."""
        return {
            "authority_public_key": self.public_key,
            "tick": self.tick,
            "epoch": self.epoch,
            "businesses": [{"id": bid, "legal_identity": legal,
                            "standing_pseudonym": self._standing[bid].handle}
                           for bid, legal in sorted(self._legal.items())],
            "tickets": [t.to_dict() for t in self._tickets.values()],
            "tokens": self.tokens.outstanding(),
            "secret": {"pseudonyms": dict(sorted(self._owner.items()))},
        }

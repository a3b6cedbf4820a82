"""Entity state machines.

Each entity reacts to one message at a time through :meth:`Entity.handle_message`
and returns the messages it wants sent. Crypto work done while handling a
message is attached as an ``ops`` annotation to the first reply, which is
what the bench cross-check reads back out of the log.
"""

from __future__ import annotations

import dataclasses
from collections import Counter

import numpy as np

from repsim.errors import (
    AlreadySpent,
    DepthViolation,
    EmptyState,
    InvalidPseudonym,
    MalformedMessage,
    ReputationError,
    SignatureRejected,
    StaleVersion,
    UnknownKey,
    UnknownSession,
    UnknownTicket,
    UnknownVotee,
)
from repsim.he import Ciphertext, EvalKey, HeBackend, KeyMaterial, PublicKey
from repsim.identity import Authority, Pseudonym, SessionAuthorization, TokenRegistry, check_pseudonym
from repsim.protocol.messages import (
    AUTHORITY,
    KEY_MANAGER,
    REPUTATION_MANAGER,
    EnginePool,
    Message,
    RatingReceipt,
    verify_receipt,
)
from repsim.reputation import (
    ReputationState,
    SystemProfile,
    combine_encrypted,
    enforce_profile,
    new_state,
    score_from,
    update_state,
)
from repsim.signing import Signer

TAMPER_DELTA = 0.25


def _ct(m: Message, name: str) -> Ciphertext:
    try:
        return Ciphertext.from_dict(m.field(name))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedMessage(f"{m.variant}.{name} is not a ciphertext: {exc}") from None


class Entity:
    role = "entity"

    def __init__(self, handle: str, backend: HeBackend | None = None, seed: int = 0):
        self.handle = handle
        self.backend = backend
        self.crypto: Counter = Counter()
        self.transcript: list[Message] = []
        self.net = None
        self._rng = np.random.default_rng(seed)

    def fresh_id(self, prefix: str = "sess:") -> str:
        return prefix + self._rng.bytes(16).hex()

    def _ops_now(self) -> dict:
        c = dict(self.crypto)
        if self.backend is not None:
            for k, v in self.backend.counter.items():
                c[k] = c.get(k, 0) + v
        return c

    @property
    def tick(self) -> int:
        return self.net.tick if self.net is not None else 0

    def reply(self, m: Message, variant: str, payload: dict, sender: str | None = None) -> Message:
        return Message(variant, sender or m.receiver, m.sender, m.session_id, payload)

    def handle_message(self, m: Message) -> list[Message]:
        self.transcript.append(m)
        before = self._ops_now()
        try:
            handler = getattr(self, "on_" + m.variant, None)
            if handler is None:
                raise MalformedMessage(f"{self.role} does not accept {m.variant}")
            out = handler(m)
        except ReputationError as exc:
            if m.variant in ("Error", "Undeliverable"):
                out = []
            else:
                out = [self.reply(m, "Error", {"code": exc.code, "detail": str(exc), "variant": m.variant})]
        after = self._ops_now()
        delta = {k: after[k] - before.get(k, 0) for k in sorted(after) if after[k] != before.get(k, 0)}
        if delta and out:
            out[0].ops = delta
        self.transcript.extend(out)
        return out


# -- key manager -------------------------------------------------------------

class KeyManager(Entity):
    """Sole holder of secret keys; generates a key pair per votee on first request."""

    role = "key_manager"

    def __init__(self, backend: HeBackend, profile: SystemProfile, seed: int = 0):
        super().__init__(KEY_MANAGER, backend, seed)
        self.profile = profile
        self._keys: dict[str, KeyMaterial] = {}
        self._by_id: dict[str, KeyMaterial] = {}

    def material(self, handle: str) -> KeyMaterial:
        km = self._keys.get(handle)
        if km is None:
            km = self.backend.keygen()
            self._keys[handle] = km
            self._by_id[km.key_id] = km
        return km

    def _secret_for(self, ct: Ciphertext):
        try:
            return self._by_id[ct.key_id].secret_key
        except KeyError:
            raise UnknownKey(ct.key_id) from None

    def _open(self, ct: Ciphertext) -> list[float]:
        return self.backend.decrypt(self._secret_for(ct), ct)

    def _score(self, n: Ciphertext, d: Ciphertext, strict: bool = False) -> list[float]:
        num, den = self._open(n), self._open(d)
        try:
            return score_from(num, den, d.error_bound)
        except EmptyState:
            if strict:
                raise
            return [self.profile.prior] * len(num)

    def reveal(self, st: ReputationState) -> list[float]:
        """Decrypt a state for reporting; not part of any protocol message."""
        return self._score(st.numerator, st.denominator, strict=True)

    def on_KeyRequest(self, m):
        votee = m.field("votee")
        km = self.material(votee)
        return [self.reply(m, "KeyResponse", {"votee": votee, "public_key": km.public_key.to_dict(),
                                              "eval_key": km.eval_key.to_dict()})]

    def on_TranscryptRequest(self, m):
        pk = self.material(m.field("votee")).public_key
        weights = []
        for pair in m.field("pairs"):
            n, d = (Ciphertext.from_dict(c) for c in pair)
            weights.append(self.backend.encrypt(pk, self._score(n, d)).to_dict())
        return [self.reply(m, "TranscryptResponse", {"weights": weights})]

    def on_ThresholdRequest(self, m):
        score = self._score(_ct(m, "numerator"), _ct(m, "denominator"), strict=True)
        agg = min(score) if self.profile.threshold_aggregate == "min" else sum(score) / len(score)
        return [self.reply(m, "ThresholdResponse", {"result": bool(agg >= float(m.field("threshold")))})]

    def on_ProfileCheck(self, m):
        n, d, s, w = (_ct(m, k) for k in ("numerator", "denominator", "s", "w"))
        old = self._score(n, d)
        d_new = self.backend.add(d, w)
        new = self._score(self.backend.add(n, s), d_new)
        s_plain, w_plain = self._open(s), self._open(w)
        feedback = [a / b if b > 0 else 0.0 for a, b in zip(s_plain, w_plain)]
        decision = enforce_profile(self.profile, old, new, feedback)
        payload = {"outcome": decision.outcome}
        if decision.outcome == "adjusted":
            payload["s"] = self._adjust(n, d_new, old, decision.score).to_dict()
        return [self.reply(m, "ProfileResult", payload)]

    def _adjust(self, n: Ciphertext, d_new: Ciphertext, old, target) -> Ciphertext:
        # replacement S with (N + S) / (D + W) == target, re-checked after encryption noise
        pk = self._by_id[n.key_id].public_key
        n_plain, d_plain = self._open(n), self._open(d_new)
        nudge = 0.0
        for _ in range(60):
            t = [min(1.0, x + nudge) for x in target]
            s = self.backend.encrypt(pk, [ti * di - ni for ti, di, ni in zip(t, d_plain, n_plain)])
            got = self._score(self.backend.add(n, s), d_new)
            if all(g >= o for g, o in zip(got, old)):
                break
            nudge = max(2 * nudge, self.backend.params.epsilon or 1e-12)
        return s


# -- reputation manager ------------------------------------------------------

class ReputationManager(Entity):
    """Stores encrypted reputation, redeems access tokens and applies signed updates."""

    role = "reputation_manager"

    def __init__(self, backend: HeBackend, profile: SystemProfile, tokens: TokenRegistry,
                 authority_key: str, engine_keys: dict[str, str], is_standing, *, dims: int,
                 epoch_length: int, pseudonym_lifetime: int, seed: int = 0):
        super().__init__(REPUTATION_MANAGER, backend, seed)
        self.profile = profile
        self.tokens = tokens
        self.authority_key = authority_key
        self.engine_keys = engine_keys
        self.is_standing = is_standing
        self.dims = dims
        self.epoch_length = epoch_length
        self.pseudonym_lifetime = pseudonym_lifetime
        self.states: dict[str, ReputationState] = {}
        self.history: dict[str, list[tuple[Ciphertext, Ciphertext]]] = {}
        self.used_tickets: set[str] = set()
        self._booting: dict[str, list] = {}
        self._pending: dict[str, tuple] = {}

    # stored state, or recomputation from the update history when not durable
    def state(self, record: str) -> ReputationState | None:
        st = self.states.get(record)
        if st is None or self.profile.durability:
            return st
        for s, w in self.history[record]:
            st = update_state(self.backend, st, s, w)
        return st

    def _apply(self, record: str, s: Ciphertext, w: Ciphertext) -> int:
        if self.profile.durability:
            self.states[record] = update_state(self.backend, self.states[record], s, w)
            return self.states[record].version
        self.history[record].append((s, w))
        return len(self.history[record])

    @staticmethod
    def _state_payload(st: ReputationState) -> dict:
        return {"version": st.version, "numerator": st.numerator.to_dict(),
                "denominator": st.denominator.to_dict()}

    def _with_state(self, record: str, then) -> list[Message]:
        st = self.state(record)
        if st is not None:
            return then(st)
        if not self.is_standing(record):
            raise UnknownVotee(record)
        waiting = self._booting.setdefault(record, [])
        waiting.append(then)
        if len(waiting) > 1:
            return []
        return [Message("KeyRequest", self.handle, KEY_MANAGER, self.fresh_id("corr:"), {"votee": record})]

    def on_KeyResponse(self, m):
        record = m.field("votee")
        pk = PublicKey.from_dict(m.field("public_key"))
        self.backend.import_eval_key(pk, EvalKey.from_dict(m.field("eval_key")))
        self.states[record] = new_state(self.backend, pk, self.profile, self.dims)
        self.history[record] = []
        out = []
        for then in self._booting.pop(record, []):
            out.extend(then(self.state(record)))
        return out

    def on_TokenMint(self, m):
        if m.sender != AUTHORITY:
            raise SignatureRejected("token mints come from the authority only")
        return []

    def on_RepRequest(self, m):
        if "token_id" in m.payload:
            ref = self.tokens.redeem(m.field("token_id"))
            record, extra = self.tokens.resolve(ref), {"ref": ref}
        else:
            record = m.field("votee")
            extra = {"votee": record}
        return self._with_state(record, lambda st: [
            self.reply(m, "RepResponse", {**extra, **self._state_payload(st)})])

    def on_SignedRating(self, m):
        r = RatingReceipt.from_dict(m.field("receipt"))
        pub = self.engine_keys.get(r.engine)
        self.crypto["verify"] += 1
        if pub is None or r.session_id != m.session_id or verify_receipt(r, pub) != "ok":
            raise SignatureRejected(f"receipt for session {m.session_id} does not verify")
        authz = SessionAuthorization.from_dict(m.field("authorization"))
        self.crypto["verify"] += 1
        if not authz.verify(self.authority_key) or authz.votee_pseudonym != r.votee:
            raise SignatureRejected("session authorization invalid for this votee")
        if authz.ticket_id in self.used_tickets:
            raise AlreadySpent(f"ticket {authz.ticket_id} already backed an update")
        st = self.state(r.votee)
        if st is None:
            raise UnknownVotee(r.votee)
        if r.version != st.version + 1:
            raise StaleVersion(f"receipt for version {r.version}, state is at {st.version}")
        s, w = Ciphertext.from_dict(r.s), Ciphertext.from_dict(r.w)
        depth = self.backend.params.depth_budget
        if w.level != depth or s.level != depth - 1:
            raise DepthViolation(f"levels S={s.level} W={w.level}, expected {depth - 1} and {depth}")
        self.used_tickets.add(authz.ticket_id)
        if self.profile.permissive:
            return [self._updated(m, r.votee, s, w, "accept")]
        corr = self.fresh_id("corr:")
        self._pending[corr] = ("profile", m, r.votee, s, w)
        return [Message("ProfileCheck", self.handle, KEY_MANAGER, corr,
                        {"votee": r.votee, **self._state_payload(st), "s": r.s, "w": r.w})]

    def _updated(self, m, votee, s, w, outcome) -> Message:
        version = self._apply(votee, s, w)
        return self.reply(m, "ReputationUpdate", {"votee": votee, "accepted": True,
                                                  "version": version, "outcome": outcome})

    def on_ProfileResult(self, m):
        kind, orig, votee, s, w = self._take(m)
        outcome = m.field("outcome")
        if outcome == "reject":
            return [self.reply(orig, "ReputationUpdate", {"votee": votee, "accepted": False,
                                                          "version": self.state(votee).version,
                                                          "outcome": "reject"})]
        if outcome == "adjusted":
            s = _ct(m, "s")
        return [self._updated(orig, votee, s, w, outcome)]

    def _take(self, m):
        try:
            return self._pending.pop(m.session_id)
        except KeyError:
            raise UnknownSession(m.session_id) from None

    def on_QueryRequest(self, m):
        cred = Pseudonym.from_dict(m.field("credential"))
        if cred.handle != m.sender or cred.standing:
            raise InvalidPseudonym("queries need the requester's own temporary pseudonym")
        self.crypto["verify"] += 1
        check_pseudonym(cred, self.authority_key, self.tick // self.epoch_length, self.pseudonym_lifetime)
        votee = m.field("votee")
        if m.field("mode") == "encrypted":
            return self._with_state(votee, lambda st: [
                self.reply(m, "QueryResponse", {"votee": votee, **self._state_payload(st)})])
        threshold = float(m.field("threshold"))
        st = self.state(votee)
        if st is None or st.version == 0:
            raise EmptyState(f"{votee} has not been rated")
        corr = self.fresh_id("corr:")
        self._pending[corr] = ("threshold", m, votee, st.version, None)
        return [Message("ThresholdRequest", self.handle, KEY_MANAGER, corr,
                        {**self._state_payload(st), "threshold": threshold})]

    def on_ThresholdResponse(self, m):
        _, orig, votee, version, _ = self._take(m)
        return [self.reply(orig, "QueryResponse", {"votee": votee, "version": version,
                                                   "result": bool(m.field("result"))})]

    def on_Error(self, m):
        entry = self._pending.pop(m.session_id, None)
        if entry is None:
            return []
        return [self.reply(entry[1], "Error", m.payload)]


# -- reputation engine -------------------------------------------------------

class ReputationEngine(Entity):
    """Combines one rating under encryption and signs the result; keeps nothing afterwards."""

    role = "reputation_engine"

    def __init__(self, handle: str, backend: HeBackend, signer: Signer, seed: int = 0):
        super().__init__(handle, backend, seed)
        self.signer = signer
        self.public_key = signer.public_key
        self.sessions: dict[str, dict] = {}
        self._corr: dict[str, str] = {}
        self.misbehave: str | None = None  # one-shot scripted deviation

    _REQUIRED = ("votee", "s_r", "numerator", "denominator", "version", "token_id",
                 "public_key", "eval_key", "with_self_rating", "dims")

    def _session(self, sid: str) -> dict:
        try:
            return self.sessions[sid]
        except KeyError:
            raise UnknownSession(sid) from None

    def on_RatingSubmission(self, m):
        for name in self._REQUIRED:
            m.field(name)
        corr = self.fresh_id("corr:")
        self.sessions[m.session_id] = {"voter": m.sender, "sub": m.payload}
        self._corr[corr] = m.session_id
        return [Message("RepRequest", self.handle, REPUTATION_MANAGER, corr,
                        {"token_id": m.payload["token_id"]})]

    def on_RepResponse(self, m):
        sid = self._corr.pop(m.session_id, None)
        if sid is None:
            raise UnknownSession(m.session_id)
        sub = self._session(sid)["sub"]
        pairs = [[m.field("numerator"), m.field("denominator")]]
        if sub["with_self_rating"]:
            pairs.append([sub["numerator"], sub["denominator"]])
        return [Message("TranscryptRequest", self.handle, KEY_MANAGER, sid,
                        {"votee": sub["votee"], "pairs": pairs})]

    def on_TranscryptResponse(self, m):
        sess = self._session(m.session_id)
        sess["weights"] = m.field("weights")
        sub = sess["sub"]
        if not sub["with_self_rating"]:
            return self._finish(m.session_id, None, False)
        return [Message("SelfRatingRequest", self.handle, sub["votee"], m.session_id,
                        {"votee": sub["votee"], "public_key": sub["public_key"], "dims": sub["dims"]})]

    def on_SelfRatingResponse(self, m):
        self._session(m.session_id)
        s_e = m.payload.get("s_e")
        return self._finish(m.session_id, s_e, bool(m.payload.get("verified", False)))

    def on_Undeliverable(self, m):
        if m.session_id in self.sessions and m.payload.get("variant") == "SelfRatingRequest":
            return self._finish(m.session_id, None, False)
        return []

    def on_Error(self, m):
        sid = self._corr.pop(m.session_id, m.session_id)
        sess = self.sessions.pop(sid, None)
        if sess is None:
            return []
        return [Message("Error", self.handle, sess["voter"], sid, m.payload)]

    def _finish(self, sid: str, s_e: dict | None, verified: bool) -> list[Message]:
        sess = self.sessions.pop(sid)
        sub = sess["sub"]
        pk = PublicKey.from_dict(sub["public_key"])
        ek = EvalKey.from_dict(sub["eval_key"])
        self.backend.import_eval_key(pk, ek)
        s_r = Ciphertext.from_dict(sub["s_r"])
        r_r = Ciphertext.from_dict(sess["weights"][0])
        r_e = Ciphertext.from_dict(sess["weights"][1]) if s_e is not None else None
        s_e_ct = Ciphertext.from_dict(s_e) if s_e is not None else None
        mode, self.misbehave = self.misbehave, None
        if mode == "depth_violation":
            s, w = s_r, r_r
        else:
            s, w = combine_encrypted(self.backend, s_r, s_e_ct, r_r, r_e, ek)
        if mode == "ciphertext_tamper":
            s = self.backend.add(s, self.backend.encrypt(pk, [TAMPER_DELTA] * int(sub["dims"])))
        receipt = RatingReceipt(sid, s.to_dict(), w.to_dict(), sub["votee"], int(sub["version"]) + 1,
                                self.handle)
        self.crypto["sign"] += 1
        receipt = dataclasses.replace(receipt, signature=self.signer.sign(receipt.signed_part()))
        return [Message("SignedRating", self.handle, sess["voter"], sid,
                        {"receipt": receipt.to_dict(), "with_self_rating": s_e is not None,
                         "verified": verified})]


# -- authority ---------------------------------------------------------------

class AuthorityNode(Entity):
    """Message front end of the merged pseudonym authority and ticket issuer."""

    role = "authority"

    def __init__(self, authority: Authority, seed: int = 0):
        super().__init__(AUTHORITY, None, seed)
        self.authority = authority

    def _ops_now(self) -> dict:
        return dict(self.authority.ops)

    def on_SpendRequest(self, m):
        tid = m.field("ticket_id")
        try:
            ticket = self.authority.ticket(tid)
        except KeyError:
            raise UnknownTicket(tid) from None
        if m.sender != ticket.voter_pseudonym:
            raise InvalidPseudonym("only the ticket's voter pseudonym may spend it")
        authz = self.authority.spend_ticket(tid)
        token = self.authority.mint_access_token(m.sender)
        return [
            Message("TokenMint", self.handle, REPUTATION_MANAGER, self.fresh_id("corr:"),
                    {"token_id": token.token_id, "ref": token.bound_reputation_ref}),
            self.reply(m, "SpendResponse", {"authorization": authz.to_dict(), "token_id": token.token_id}),
        ]


# -- businesses --------------------------------------------------------------

class BusinessNode(Entity):
    """A business acting as voter, votee (self-rating source) or requester."""

    role = "business"

    def __init__(self, name: str, standing: str, backend: HeBackend, pool: EnginePool, *,
                 dims: int, self_rating=None, seed: int = 0):
        super().__init__(standing, backend, seed)
        self.name = name
        self.pool = pool
        self.dims = dims
        self.self_rating = list(self_rating) if self_rating is not None else None
        self.jobs: dict[str, dict] = {}

    # -- voter ---------------------------------------------------------------

    def start_rating(self, ticket, rating, misbehavior: str | None = None):
        attempts = 3 if misbehavior == "double_spend_race" else 1
        job = {"kind": "rate", "ticket_id": ticket.ticket_id, "voter": ticket.voter_pseudonym,
               "votee": ticket.votee_pseudonym, "rating": [float(x) for x in rating],
               "misbehavior": misbehavior, "status": "pending", "errors": []}
        sids = [self.fresh_id() for _ in range(attempts)]
        for sid in sids:
            self.jobs[sid] = job
        order = self._rng.permutation(attempts) if attempts > 1 else [0]
        return job, [Message("SpendRequest", job["voter"], AUTHORITY, sids[i],
                             {"ticket_id": ticket.ticket_id}) for i in order]

    def _job(self, m: Message) -> dict:
        try:
            return self.jobs[m.session_id]
        except KeyError:
            raise UnknownSession(m.session_id) from None

    def on_SpendResponse(self, m):
        job = self._job(m)
        if "authorization" in job:
            return []
        job.update(sid=m.session_id, authorization=m.field("authorization"), token_id=m.field("token_id"))
        return [Message("KeyRequest", job["voter"], KEY_MANAGER, m.session_id, {"votee": job["votee"]})]

    def on_KeyResponse(self, m):
        job = self._job(m)
        job["public_key"], job["eval_key"] = m.field("public_key"), m.field("eval_key")
        pk = PublicKey.from_dict(job["public_key"])
        job["s_r"] = self.backend.encrypt(pk, job["rating"]).to_dict()
        return [Message("RepRequest", job["voter"], REPUTATION_MANAGER, m.session_id, {"votee": job["votee"]})]

    def on_RepResponse(self, m):
        job = self._job(m)
        job["engine"] = self.pool.assign()
        job["submission"] = {
            "votee": job["votee"], "s_r": job["s_r"], "numerator": m.field("numerator"),
            "denominator": m.field("denominator"), "version": m.field("version"),
            "token_id": job["token_id"], "authorization": job["authorization"],
            "public_key": job["public_key"], "eval_key": job["eval_key"],
            "with_self_rating": True, "dims": len(job["rating"]),
        }
        return [Message("RatingSubmission", job["voter"], job["engine"], m.session_id, job["submission"])]

    def on_SignedRating(self, m):
        job = self._job(m)
        r = RatingReceipt.from_dict(m.field("receipt"))
        self.crypto["verify"] += 1
        if verify_receipt(r, self.pool.public_keys.get(r.engine, "")) != "ok" or r.engine != m.sender:
            job["status"] = "bad_receipt"
            return []
        job["receipt"] = r.to_dict()
        if job["misbehavior"] == "forged_signature":
            boosted = self.backend.encrypt(PublicKey.from_dict(job["public_key"]), [1.0] * len(job["rating"]))
            r = dataclasses.replace(r, s=boosted.to_dict())
        return [Message("SignedRating", job["voter"], REPUTATION_MANAGER, m.session_id,
                        {"receipt": r.to_dict(), "authorization": job["authorization"]})]

    def on_ReputationUpdate(self, m):
        job = self._job(m)
        if m.session_id != job.get("sid"):
            return []
        job["status"] = m.field("outcome") if m.field("accepted") else "rejected"
        job["version"] = m.field("version")
        again = self.fresh_id()
        if job["misbehavior"] == "token_replay":
            self.jobs[again] = job
            return [Message("RatingSubmission", job["voter"], job["engine"], again, job["submission"])]
        if job["misbehavior"] == "ticket_replay":
            self.jobs[again] = job
            return [Message("SpendRequest", job["voter"], AUTHORITY, again, {"ticket_id": job["ticket_id"]})]
        return []

    def on_Error(self, m):
        job = self.jobs.get(m.session_id)
        if job is None:
            return []
        job["errors"].append(m.payload.get("code", "Error"))
        if job.get("sid", m.session_id) == m.session_id and job["status"] == "pending":
            job["status"] = m.payload.get("code", "Error")
        return []

    def on_Undeliverable(self, m):
        job = self.jobs.get(m.session_id)
        if job is not None and job["status"] == "pending":
            job["status"] = "undeliverable"
        return []

    # -- votee ---------------------------------------------------------------

    def on_SelfRatingRequest(self, m):
        if self.self_rating is None:
            return [self.reply(m, "SelfRatingResponse", {"s_e": None, "verified": False})]
        pk = PublicKey.from_dict(m.field("public_key"))
        s_e = self.backend.encrypt(pk, self.self_rating[: int(m.field("dims"))])
        return [self.reply(m, "SelfRatingResponse", {"s_e": s_e.to_dict(), "verified": True})]

    # -- requester -----------------------------------------------------------

    def start_query(self, credential: Pseudonym, votee: str, threshold: float | None = None):
        sid = self.fresh_id()
        job = {"kind": "query", "votee": votee, "status": "pending", "errors": []}
        self.jobs[sid] = job
        payload = {"votee": votee, "credential": credential.to_dict(),
                   "mode": "encrypted" if threshold is None else "threshold"}
        if threshold is not None:
            payload["threshold"] = float(threshold)
        return job, [Message("QueryRequest", credential.handle, REPUTATION_MANAGER, sid, payload)]

    def on_QueryResponse(self, m):
        job = self._job(m)
        job["status"] = "ok"
        job["response"] = m.payload
        return []

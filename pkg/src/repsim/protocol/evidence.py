"""Misbehaviour detectors that read nothing but the event log.

Every :class:`Evidence` the auditor reports comes out of one of these
functions, so re-checking a finding means running its detector again on the
log and looking for the same message set.
"""

from __future__ import annotations

from collections import defaultdict

from repsim.errors import ReputationError
from repsim.he import Ciphertext, EvalKey, HeParams, PublicKey, make_backend
from repsim.identity import SessionAuthorization
from repsim.protocol.messages import REPUTATION_MANAGER, Evidence, RatingReceipt, verify_receipt
from repsim.reputation import combine_encrypted


class LogView:
    """Indexed read-only view over parsed log lines."""

    def __init__(self, lines: list[dict]):
        self.lines = lines
        self.header = next((l for l in lines if l.get("kind") == "header"), {})
        self.msgs = [l for l in lines if l.get("kind") == "msg"]
        self.by_seq = {l["seq"]: l for l in self.msgs}

    def of(self, variant: str, receiver: str | None = None, sender_prefix: str | None = None):
        for l in self.msgs:
            if l["variant"] != variant:
                continue
            if receiver is not None and l["receiver"] != receiver:
                continue
            if sender_prefix is not None and not l["sender"].startswith(sender_prefix):
                continue
            yield l

    @property
    def engine_keys(self) -> dict:
        return self.header.get("engine_keys", {})

    @property
    def authority_key(self) -> str:
        return self.header.get("authority_key", "")

    @property
    def params(self) -> HeParams:
        return HeParams.from_dict(self.header["he_params"])


def _view(log) -> LogView:
    return log if isinstance(log, LogView) else LogView(list(log))


def replayed_tokens(view: LogView) -> list[Evidence]:
    groups = defaultdict(list)
    for l in view.of("RepRequest", receiver=REPUTATION_MANAGER):
        if "token_id" in l["payload"]:
            groups[l["payload"]["token_id"]].append(l["seq"])
    return [Evidence("ReplayedToken", tuple(seqs), f"token presented {len(seqs)} times")
            for seqs in groups.values() if len(seqs) > 1]


def replayed_tickets(view: LogView) -> list[Evidence]:
    groups = defaultdict(list)
    for l in view.of("SpendRequest"):
        groups[l["payload"].get("ticket_id")].append(l["seq"])
    found = {t: Evidence("ReplayedTicket", tuple(seqs), f"{len(seqs)} spend attempts on one ticket")
             for t, seqs in groups.items() if len(seqs) > 1}
    forwarded = defaultdict(list)
    for l in view.of("SignedRating", receiver=REPUTATION_MANAGER):
        tid = (l["payload"].get("authorization") or {}).get("ticket_id")
        forwarded[tid].append(l["seq"])
    for t, seqs in forwarded.items():
        if len(seqs) > 1 and t not in found:
            found[t] = Evidence("ReplayedTicket", tuple(seqs), "one authorization backs several updates")
    return list(found.values())


def bad_signatures(view: LogView) -> list[Evidence]:
    out = []
    for l in view.of("SignedRating"):
        try:
            r = RatingReceipt.from_dict(l["payload"]["receipt"])
        except (ReputationError, KeyError):
            out.append(Evidence("BadSignature", (l["seq"],), "unparseable receipt"))
            continue
        if verify_receipt(r, view.engine_keys.get(r.engine, "")) != "ok":
            out.append(Evidence("BadSignature", (l["seq"],), f"receipt not signed by {r.engine}"))
            continue
        authz = l["payload"].get("authorization")
        if authz is not None and not SessionAuthorization.from_dict(authz).verify(view.authority_key):
            out.append(Evidence("BadSignature", (l["seq"],), "session authorization not signed by authority"))
    return out


def _engine_ratings(view: LogView):
    for l in view.of("SignedRating", sender_prefix="engine:"):
        try:
            yield l, RatingReceipt.from_dict(l["payload"]["receipt"])
        except ReputationError:
            continue


def _levels_ok(view: LogView, r: RatingReceipt) -> bool:
    depth = view.params.depth_budget
    return r.w.get("level") == depth and r.s.get("level") == depth - 1


def depth_violations(view: LogView) -> list[Evidence]:
    return [Evidence("DepthViolation", (l["seq"],),
                     f"S at level {r.s.get('level')}, W at level {r.w.get('level')}")
            for l, r in _engine_ratings(view) if not _levels_ok(view, r)]


def _last_before(view: LogView, variant: str, session: str, receiver: str, seq: int):
    hit = None
    for l in view.of(variant, receiver=receiver):
        if l["session_id"] == session and l["seq"] < seq:
            hit = l
    return hit


def tampered_updates(view: LogView) -> list[Evidence]:
    out = []
    backend = None
    for l, r in _engine_ratings(view):
        if not _levels_ok(view, r):
            continue
        engine, sid = l["sender"], l["session_id"]
        sub = _last_before(view, "RatingSubmission", sid, engine, l["seq"])
        trans = _last_before(view, "TranscryptResponse", sid, engine, l["seq"])
        if sub is None or trans is None:
            out.append(Evidence("TamperedUpdate", (l["seq"],), "signed update without logged inputs"))
            continue
        used = [sub["seq"], trans["seq"]]
        s_e = None
        if l["payload"].get("with_self_rating"):
            self_resp = _last_before(view, "SelfRatingResponse", sid, engine, l["seq"])
            if self_resp is None or self_resp["payload"].get("s_e") is None:
                out.append(Evidence("TamperedUpdate", (l["seq"],), "self-rating claimed but not logged"))
                continue
            used.append(self_resp["seq"])
            s_e = Ciphertext.from_dict(self_resp["payload"]["s_e"])
        if backend is None:
            backend = make_backend(view.params, seed=0)
        p = sub["payload"]
        pk, ek = PublicKey.from_dict(p["public_key"]), EvalKey.from_dict(p["eval_key"])
        backend.import_eval_key(pk, ek)
        weights = [Ciphertext.from_dict(w) for w in trans["payload"]["weights"]]
        try:
            s, w = combine_encrypted(backend, Ciphertext.from_dict(p["s_r"]), s_e, weights[0],
                                     weights[1] if s_e is not None else None, ek)
        except (ReputationError, IndexError) as exc:
            out.append(Evidence("TamperedUpdate", (*used, l["seq"]), f"inputs do not evaluate: {exc}"))
            continue
        if s.to_dict() != r.s or w.to_dict() != r.w:
            which = "S" if s.to_dict() != r.s else "W"
            out.append(Evidence("TamperedUpdate", (*used, l["seq"]),
                                f"signed {which} differs from recomputation over logged inputs"))
    return out


DETECTORS = {
    "ReplayedToken": replayed_tokens,
    "ReplayedTicket": replayed_tickets,
    "BadSignature": bad_signatures,
    "DepthViolation": depth_violations,
    "TamperedUpdate": tampered_updates,
}


def detect(log) -> list[Evidence]:
    view = _view(log)
    found = []
    for fn in DETECTORS.values():
        found.extend(fn(view))
    return sorted(found, key=lambda e: (min(e.messages, default=-1), e.kind))


def recheck(ev: Evidence, log) -> bool:
    fn = DETECTORS.get(ev.kind)
    if fn is None:
        return False
    return any(tuple(e.messages) == tuple(ev.messages) for e in fn(_view(log)))

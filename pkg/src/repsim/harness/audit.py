"""Privacy and integrity auditor over an event log.

Each check returns ``{"check", "status", "witnesses", "note"}`` where
witnesses are log ``seq`` numbers. Misbehaviour evidence comes from
:mod:`repsim.protocol.evidence` and is folded into the matching check.
"""

from __future__ import annotations

import json
from collections import defaultdict

from repsim.harness.logio import check_log
from repsim.protocol import KEY_MANAGER, REPUTATION_MANAGER, LogView, detect
from repsim.signing import canonical

# numeric fields that may legitimately appear in manager/engine traffic
_PUBLIC_NUMBERS = {"error_bound", "level", "version", "threshold", "dims", "seq", "spent_at"}
_SECRET_KEYS = {"secret_key", "score", "rating", "plaintext", "value"}


def _check(name: str, witnesses, note: str = "") -> dict:
    w = sorted(set(witnesses))
    return {"check": name, "status": "fail" if w else "pass", "witnesses": w, "note": note if w else ""}


def _walk(obj, key=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _walk(v, k)
    elif isinstance(obj, list):
        for v in obj:
            yield from _walk(v, key)
    else:
        yield key, obj


def identity_containment(view: LogView, secrets: dict | None) -> dict:
    exact = set()
    if secrets:
        for b in secrets.get("businesses", []):
            exact |= {b["id"], b["legal_identity"]}
    bad = []
    for l in view.msgs:
        values = [l["sender"], l["receiver"], l["session_id"]]
        values += [v for _, v in _walk(l["payload"]) if isinstance(v, str)]
        if any("biz:" in v or v in exact for v in values):
            bad.append(l["seq"])
    return _check("identity_containment", bad, "business identity appears in protocol traffic")


def plaintext_absence(view: LogView) -> dict:
    engines = set(view.engine_keys)
    watched = engines | {REPUTATION_MANAGER}
    bad = []
    for l in view.msgs:
        if l["sender"] not in watched and l["receiver"] not in watched:
            continue
        if any((key in _SECRET_KEYS and v is not None) or
               (isinstance(v, float) and key not in _PUBLIC_NUMBERS) for key, v in _walk(l["payload"])):
            bad.append(l["seq"])
    for l in view.msgs:
        if '"secret_key"' in json.dumps(l["payload"]):
            bad.append(l["seq"])
    return _check("plaintext_absence", bad, "plaintext value or secret key visible to manager/engine")


def linkage_structure(view: LogView) -> dict:
    votees = {l["payload"].get("votee") for l in view.of("RepRequest") if "votee" in l["payload"]}
    voter_sessions = {l["session_id"] for l in view.of("RatingSubmission")}
    bad = []
    for l in view.msgs:
        if l["receiver"] != REPUTATION_MANAGER:
            continue
        text = canonical(l["payload"]).decode()
        if "tok:" in text and any(v and v in text for v in votees):
            bad.append(l["seq"])
        if "token_id" in l["payload"] and l["session_id"] in voter_sessions:
            bad.append(l["seq"])
    return _check("linkage_structure", bad, "manager can join a voter token with a votee in one message")


def two_vote_privacy(view: LogView) -> dict:
    seen: dict[str, int] = {}
    bad = []
    fresh = []
    tokens = set()
    for l in view.of("RatingSubmission"):
        if l["payload"].get("token_id") in tokens:
            continue  # replays are caught as evidence, not as a privacy failure
        tokens.add(l["payload"].get("token_id"))
        fresh.append((l["seq"], l["payload"].get("s_r")))
    for l in view.of("SelfRatingResponse"):
        fresh.append((l["seq"], l["payload"].get("s_e")))
    for l in view.of("TranscryptResponse"):
        for w in l["payload"].get("weights", []):
            fresh.append((l["seq"], w))
    for seq, ct in fresh:
        if not ct:
            continue
        payload = ct.get("payload")
        if payload in seen:
            bad += [seen[payload], seq]
        seen[payload] = seq
    return _check("two_vote_privacy", bad, "two fresh encryptions share ciphertext bytes")


def ticket_bijection(view: LogView) -> dict:
    issued = set()
    for l in view.lines:
        if l.get("kind") == "event" and l.get("type") == "contract":
            issued.update(l.get("tickets", []))
    forwarded = {l["session_id"]: l for l in view.of("SignedRating", receiver=REPUTATION_MANAGER)}
    used = defaultdict(list)
    bad = []
    for l in view.of("ReputationUpdate"):
        if not l["payload"].get("accepted"):
            continue
        src = forwarded.get(l["session_id"])
        if src is None:
            bad.append(l["seq"])
            continue
        tid = (src["payload"].get("authorization") or {}).get("ticket_id")
        if tid not in issued:
            bad.append(l["seq"])
        used[tid].append(l["seq"])
    for seqs in used.values():
        if len(seqs) > 1:
            bad += seqs
    return _check("ticket_bijection", bad, "accepted update without exactly one issued ticket")


def pseudonym_hygiene(view: LogView, secrets: dict | None) -> dict:
    standing = {l["payload"].get("votee") for l in view.of("RepRequest") if "votee" in l["payload"]}
    if secrets:
        standing |= {b["standing_pseudonym"] for b in secrets.get("businesses", [])}
    bad = []
    uses = defaultdict(set)
    for l in view.of("QueryRequest"):
        cred = l["payload"].get("credential", {})
        if cred.get("standing") or l["sender"] in standing:
            bad.append(l["seq"])
        uses[l["sender"]].add(("query", l["session_id"]))
    for l in view.of("SpendRequest"):
        if l["sender"] in standing:
            bad.append(l["seq"])
        uses[l["sender"]].add(("ticket", l["payload"].get("ticket_id")))
    for handle, what in uses.items():
        if len(what) > 1:
            bad += [l["seq"] for l in view.msgs if l["sender"] == handle and
                    l["variant"] in ("QueryRequest", "SpendRequest")]
    if secrets:
        owners = secrets.get("secret", {}).get("pseudonyms", {})
        for l in view.msgs:
            if l["variant"] in ("QueryRequest", "SpendRequest") and l["sender"] not in owners:
                bad.append(l["seq"])
    return _check("pseudonym_hygiene", bad, "long-term or reused pseudonym acting as voter/requester")


_EVIDENCE_CHECK = {
    "ReplayedToken": "one_time_tokens",
    "ReplayedTicket": "one_time_tickets",
    "BadSignature": "signatures",
    "TamperedUpdate": "update_integrity",
    "DepthViolation": "update_integrity",
}


def audit(lines: list[dict], authority_secrets: dict | None = None) -> dict:
    check_log(lines)
    view = LogView(lines)
    evidence = detect(view)
    checks = [
        identity_containment(view, authority_secrets),
        plaintext_absence(view),
        linkage_structure(view),
        two_vote_privacy(view),
        ticket_bijection(view),
        pseudonym_hygiene(view, authority_secrets),
    ]
    for name in ("one_time_tokens", "one_time_tickets", "signatures", "update_integrity"):
        hits = [s for e in evidence if _EVIDENCE_CHECK[e.kind] == name for s in e.messages]
        checks.append(_check(name, hits, "see evidence"))
    return {"checks": checks, "evidence": [e.to_dict() for e in evidence]}


def trust_flags(view: LogView) -> dict:
    profile = view.header.get("system_profile", {})
    model = profile.get("aggregation_model", "weighted_mean")
    return {
        "transcryption_exposure": {
            "requests": sum(1 for _ in view.of("TranscryptRequest", receiver=KEY_MANAGER)),
            "note": "key manager decrypts voter and votee reputations to re-encrypt them as weights",
        },
        "merged_authority": "pseudonym authority and ticket issuer are one entity and can link tickets to businesses",
        "update_function": "weighted running mean N/D with reputations as weights (artifact choice)",
        "aggregation_model": model if model == "weighted_mean" else f"{model} (catalog only; encrypted pipeline uses weighted_mean)",
        "self_rating_attestation": "modelled as a boolean verified flag, no attestation",
        "structural_privacy_only": ["two_vote_privacy", "pseudonym_hygiene"],
    }

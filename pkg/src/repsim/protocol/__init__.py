"""Entities, messages and the rating/query flows between them.

The rating flow for one ticket, as it appears on the wire::

    voter      -> authority   SpendRequest          (ticket spent, token minted)
    authority  -> rm          TokenMint
    authority  -> voter       SpendResponse
    voter      -> km          KeyRequest            -> KeyResponse (pk, eval key)
    voter      -> rm          RepRequest(votee)     -> RepResponse (N_e, D_e)
    voter      -> engine      RatingSubmission
    engine     -> rm          RepRequest(token)     -> RepResponse (N_r, D_r)
    engine     -> km          TranscryptRequest     -> TranscryptResponse (R_r, R_e)
    engine     -> votee       SelfRatingRequest     -> SelfRatingResponse
    engine     -> voter       SignedRating
    voter      -> rm          SignedRating          -> ReputationUpdate

The engine's request to the manager uses its own correlator, never the
voter's session id.
"""

from repsim.protocol.entities import (
    AuthorityNode,
    BusinessNode,
    Entity,
    KeyManager,
    ReputationEngine,
    ReputationManager,
)
from repsim.protocol.evidence import LogView, detect, recheck
from repsim.protocol.messages import (
    AUTHORITY,
    EVIDENCE_KINDS,
    KEY_MANAGER,
    NETWORK,
    REPUTATION_MANAGER,
    VARIANTS,
    EnginePool,
    Evidence,
    Message,
    RatingReceipt,
    assign_engine,
    verify_receipt,
)
from repsim.protocol.network import EventLog, Network

__all__ = [
    "AUTHORITY", "EVIDENCE_KINDS", "KEY_MANAGER", "NETWORK", "REPUTATION_MANAGER", "VARIANTS",
    "AuthorityNode", "BusinessNode", "EnginePool", "Entity", "EventLog", "Evidence", "KeyManager",
    "LogView", "Message", "Network", "RatingReceipt", "ReputationEngine", "ReputationManager",
    "assign_engine", "detect", "recheck", "verify_receipt",
]

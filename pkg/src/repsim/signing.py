"""Canonical JSON and Ed25519 signatures over it."""

from __future__ import annotations

import json
from functools import lru_cache

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat


def canonical(obj) -> bytes:
    """Sorted keys, no whitespace, UTF-8. Used for every signed or logged value."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False,
                      allow_nan=False).encode("utf-8")


class Signer:
    def __init__(self, seed_bytes: bytes):
        self._key = Ed25519PrivateKey.from_private_bytes(seed_bytes)
        self.public_key = self._key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw).hex()

    @classmethod
    def from_rng(cls, rng) -> "Signer":
        return cls(rng.bytes(32))

    def sign(self, obj) -> str:
        return self._key.sign(canonical(obj)).hex()


@lru_cache(maxsize=65536)
def _verify_bytes(public_key_hex: str, data: bytes, signature_hex: str) -> bool:
    # pure function of its inputs; the cache only saves repeat checks of one receipt
    try:
        key = Ed25519PublicKey.from_public_bytes(bytes.fromhex(public_key_hex))
        key.verify(bytes.fromhex(signature_hex), data)
    except (InvalidSignature, ValueError):
        return False
    return True


def verify(public_key_hex: str, obj, signature_hex: str) -> bool:
    return _verify_bytes(public_key_hex, canonical(obj), signature_hex)


def verify_uncached(public_key_hex: str, obj, signature_hex: str) -> bool:
    """Same answer as :func:`verify`, always doing the curve arithmetic (for timing)."""
    return _verify_bytes.__wrapped__(public_key_hex, canonical(obj), signature_hex)

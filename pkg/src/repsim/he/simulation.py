"""Simulation backend.

The ciphertext carries the exact plaintext and a modelled noise term, both
sealed under a key-derived keystream and authenticated with HMAC. The
decrypted value is ``true + noise`` and ``|noise| <= error_bound`` holds by
construction:

* encrypt: noise drawn uniformly from ``[-eps, eps]``, bound ``eps``
* add: noises add, bound ``eps_a + eps_b``
* mul: ``noise_a + noise_b + fresh``, bound ``eps_a + eps_b + eps``
* scalar add: noise unchanged; scalar mul: noise scaled by ``p``,
  bound scaled by ``max(1, max|p|)`` so it never shrinks

Plain multiplication does not consume a level here.

This backend gives no confidentiality against anyone holding a public or
evaluation key; it exists so that protocol logic and auditing can be tested
deterministically without lattice arithmetic.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from typing import Sequence

import numpy as np

from repsim.errors import CorruptedCiphertext, DepthExhausted, KeyMismatch, UnknownKey
from repsim.he.core import (
    Ciphertext,
    EvalKey,
    HeBackend,
    HeParams,
    KeyMaterial,
    PublicKey,
    SecretKey,
    check_plain,
    same_key,
)

_MAGIC = b"SIM1"
_HEADER = struct.Struct("<4sH16s")
_TAG_LEN = 16


def _derive(secret: bytes) -> bytes:
    seal = hashlib.sha256(b"repsim/seal" + secret).digest()
    mac = hashlib.sha256(b"repsim/mac" + secret).digest()
    return seal + mac


def _keystream(seal_key: bytes, nonce: bytes, length: int) -> bytes:
    return hashlib.shake_256(seal_key + nonce).digest(length)


def _xor(a: bytes, b: bytes) -> bytes:
    return (np.frombuffer(a, dtype=np.uint8) ^ np.frombuffer(b, dtype=np.uint8)).tobytes()


def _tag(mac_key: bytes, key_id: str, level: int, bound: float, body: bytes) -> bytes:
    meta = key_id.encode() + struct.pack("<qd", level, bound)
    return hmac.new(mac_key, meta + body, hashlib.sha256).digest()[:_TAG_LEN]


class SimulationBackend(HeBackend):
    kind = "simulation"

    def __init__(self, params: HeParams, seed: int | None = 0):
        super().__init__(params)
        self.rng = np.random.default_rng(seed)
        self._vault: dict[str, bytes] = {}
        self._issued: set[str] = set()

    # -- keys ----------------------------------------------------------------

    def keygen(self) -> KeyMaterial:
        self.counter["keygen"] += 1
        while True:
            key_id = "key:" + self.rng.bytes(12).hex()
            if key_id not in self._issued:
                break
        self._issued.add(key_id)
        secret = self.rng.bytes(32)
        material = _derive(secret)
        self._vault[key_id] = material
        return KeyMaterial(
            key_id=key_id,
            public_key=PublicKey(key_id, material),
            secret_key=SecretKey(key_id, secret),
            eval_key=EvalKey(key_id, material),
        )

    def import_eval_key(self, pk: PublicKey, ek: EvalKey) -> None:
        same_key(pk.key_id, ek.key_id)
        self._vault[ek.key_id] = ek.data

    # -- sealing -------------------------------------------------------------

    def _seal(self, material: bytes, key_id: str, level: int, bound: float,
              values: np.ndarray, noise: np.ndarray, nonce: bytes) -> Ciphertext:
        n = len(values)
        plain = np.concatenate([values, noise]).astype("<f8").tobytes()
        sealed = _xor(plain, _keystream(material[:32], nonce, len(plain)))
        body = _HEADER.pack(_MAGIC, n, nonce) + sealed
        tag = _tag(material[32:], key_id, level, bound, body)
        return Ciphertext(key_id=key_id, level=level, error_bound=bound, payload=body + tag)

    def _open(self, material: bytes, ct: Ciphertext) -> tuple[np.ndarray, np.ndarray]:
        payload = ct.payload
        if len(payload) < _HEADER.size + _TAG_LEN:
            raise CorruptedCiphertext("payload too short")
        body, tag = payload[:-_TAG_LEN], payload[-_TAG_LEN:]
        if not hmac.compare_digest(tag, _tag(material[32:], ct.key_id, ct.level, ct.error_bound, body)):
            raise CorruptedCiphertext("authentication tag mismatch")
        magic, n, nonce = _HEADER.unpack_from(body)
        sealed = body[_HEADER.size:]
        if magic != _MAGIC or len(sealed) != 16 * n:
            raise CorruptedCiphertext("malformed payload")
        plain = np.frombuffer(_xor(sealed, _keystream(material[:32], nonce, len(sealed))), dtype="<f8")
        return plain[:n].copy(), plain[n:].copy()

    def _material(self, key_id: str) -> bytes:
        try:
            return self._vault[key_id]
        except KeyError:
            raise UnknownKey(f"no evaluation material for {key_id}") from None

    def _derived(self, op: str, *parts: bytes) -> tuple[bytes, int]:
        h = hashlib.sha256(op.encode())
        for p in parts:
            h.update(len(p).to_bytes(4, "little"))
            h.update(p)
        digest = h.digest()
        return digest[:16], int.from_bytes(digest[16:], "little")

    # -- public operations ---------------------------------------------------

    def encrypt(self, pk: PublicKey, values: Sequence[float]) -> Ciphertext:
        vals = np.asarray(check_plain(values, self.params.slot_count), dtype=float)
        self.counter["encrypt"] += 1
        eps = float(self.params.epsilon)
        noise = self.rng.uniform(-eps, eps, len(vals)) if eps > 0 else np.zeros(len(vals))
        nonce = self.rng.bytes(16)
        return self._seal(pk.data, pk.key_id, self.params.depth_budget, eps, vals, noise, nonce)

    def decrypt(self, sk: SecretKey, ct: Ciphertext) -> list[float]:
        if sk.key_id != ct.key_id:
            raise KeyMismatch(f"secret key {sk.key_id} cannot open ciphertext under {ct.key_id}")
        self.counter["decrypt"] += 1
        values, noise = self._open(_derive(sk.data), ct)
        return (values + noise).tolist()

    def _pair(self, a: Ciphertext, b: Ciphertext):
        key_id = same_key(a.key_id, b.key_id)
        material = self._material(key_id)
        va, na = self._open(material, a)
        vb, nb = self._open(material, b)
        n = max(len(va), len(vb))
        if len(va) == len(vb):
            return key_id, material, va, na, vb, nb
        pad = lambda x: np.pad(x, (0, n - len(x)))  # noqa: E731
        return key_id, material, pad(va), pad(na), pad(vb), pad(nb)

    def add(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        key_id, material, va, na, vb, nb = self._pair(a, b)
        self.counter["he_add"] += 1
        nonce, _ = self._derived("add", a.payload, b.payload)
        return self._seal(material, key_id, min(a.level, b.level), a.error_bound + b.error_bound,
                          va + vb, na + nb, nonce)

    def mul(self, a: Ciphertext, b: Ciphertext, ek: EvalKey) -> Ciphertext:
        same_key(a.key_id, b.key_id, ek.key_id)
        level = min(a.level, b.level) - 1
        if level < 0:
            raise DepthExhausted("no multiplicative depth left")
        key_id, material, va, na, vb, nb = self._pair(a, b)
        self.counter["he_mul"] += 1
        eps = float(self.params.epsilon)
        nonce, seed = self._derived("mul", a.payload, b.payload)
        gen = np.random.default_rng(seed)
        fresh = gen.uniform(-eps, eps, len(va)) if eps > 0 else np.zeros(len(va))
        return self._seal(material, key_id, level, a.error_bound + b.error_bound + eps,
                          va * vb, na + nb + fresh, nonce)

    def scalar(self, op: str, a: Ciphertext, plain: Sequence[float]) -> Ciphertext:
        material = self._material(a.key_id)
        va, na = self._open(material, a)
        p = np.asarray(self._check_scalar(op, len(va), plain), dtype=float)
        self.counter["he_scalar"] += 1
        nonce, _ = self._derived("scalar-" + op, a.payload, p.astype("<f8").tobytes())
        if op == "add":
            return self._seal(material, a.key_id, a.level, a.error_bound, va + p, na, nonce)
        scale = max(1.0, float(np.max(np.abs(p)))) if len(p) else 1.0
        return self._seal(material, a.key_id, a.level, a.error_bound * scale, va * p, na * p, nonce)

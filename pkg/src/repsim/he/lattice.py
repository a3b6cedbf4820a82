"""Approximate-arithmetic RLWE backend (RNS variant of CKKS) in numpy.

Test-scale parameters only: ring degree ``N = max(16, 2 * next_pow2(slots))``,
a 2-prime base modulus near 2^31, one ~30-bit rescaling prime per level and
one special prime for key switching. All primes are below 2^31 so products
of residues fit in int64. Nothing here is a security estimate.

Error accounting. Each ciphertext also carries, inside its payload, a public
magnitude bound ``M`` on its slot values (``max(1, max|x|)`` at encryption).
With ``e = params.epsilon`` as the per-operation noise allowance:

* encrypt: ``e``
* add: ``e_a + e_b`` plus ``M_b * |s_b/s_a - 1|`` when scales differ, plus
  ``e`` if a level/scale alignment step was needed
* mul: ``M_a*e_b + M_b*e_a + e_a*e_b + e`` (one level consumed)
* scalar add: ``e_a + e`` (no level consumed)
* scalar mul: ``e_a*max(1,max|p|) + e`` (one level consumed)

``epsilon`` must be at least :meth:`LatticeBackend.noise_floor`, a
high-probability bound on fresh and rescaling noise for the chosen ring.
"""

from __future__ import annotations

import hashlib
import math
import os
import struct
from functools import lru_cache
from typing import Sequence

import numpy as np

from repsim.errors import (
    BackendUnavailable,
    CorruptedCiphertext,
    DepthExhausted,
    InvalidParams,
    KeyMismatch,
)
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

SCALE_BITS = 30
SIGMA = 3.2
_MAGIC = b"LAT1"
_HDR = struct.Struct("<4sHHHIdd")
_DIGEST = 16


def lattice_available() -> bool:
    """The lattice backend can be switched off with ``REPSIM_LATTICE=0``."""
    return os.environ.get("REPSIM_LATTICE", "1") not in ("0", "off", "false")


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _primes_below(bound: int, count: int, two_n: int, skip: set[int]) -> list[int]:
    out = []
    p = bound - (bound - 1) % two_n
    while len(out) < count:
        if p not in skip and _is_prime(p):
            out.append(p)
        p -= two_n
    return out


def _root_of_unity(p: int, two_n: int) -> int:
    for g in range(2, p):
        psi = pow(g, (p - 1) // two_n, p)
        if pow(psi, two_n // 2, p) == p - 1:
            return psi
    raise ValueError("no primitive root found")


def _bitrev(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    return np.array([int(format(i, f"0{bits}b")[::-1], 2) for i in range(n)], dtype=np.int64)


class _Ring:
    """Negacyclic NTT over a fixed list of primes, vectorised across rows."""

    def __init__(self, n: int, primes: list[int]):
        self.n = n
        self.primes = np.array(primes, dtype=np.int64)
        self.rev = _bitrev(n)
        k = len(primes)
        self.psi = np.zeros((k, n), dtype=np.int64)
        self.psi_inv = np.zeros((k, n), dtype=np.int64)
        self.n_inv = np.zeros(k, dtype=np.int64)
        self.fwd: list[np.ndarray] = []
        self.inv: list[np.ndarray] = []
        stages = []
        m = 1
        while m < n:
            stages.append(m)
            m *= 2
        fwd = [np.zeros((k, m), dtype=np.int64) for m in stages]
        inv = [np.zeros((k, m), dtype=np.int64) for m in stages]
        for i, p in enumerate(primes):
            psi = _root_of_unity(p, 2 * n)
            psi_i = pow(psi, -1, p)
            self.psi[i] = [pow(psi, j, p) for j in range(n)]
            self.psi_inv[i] = [pow(psi_i, j, p) for j in range(n)]
            self.n_inv[i] = pow(n, -1, p)
            omega, omega_i = psi * psi % p, psi_i * psi_i % p
            for s, m in enumerate(stages):
                w, wi = pow(omega, n // (2 * m), p), pow(omega_i, n // (2 * m), p)
                fwd[s][i] = [pow(w, t, p) for t in range(m)]
                inv[s][i] = [pow(wi, t, p) for t in range(m)]
        self.fwd, self.inv = fwd, inv

    def _transform(self, a: np.ndarray, idx: list[int], tables) -> np.ndarray:
        k, n = a.shape
        p2 = self.primes[idx][:, None]
        p4 = p2[:, :, None, None]
        a = a[:, self.rev]
        for s, tw in enumerate(tables):
            m = tw.shape[1]
            a = a.reshape(k, n // (2 * m), 2, m)
            u = a[:, :, 0:1, :]
            v = a[:, :, 1:2, :] * tw[idx][:, None, None, :] % p4
            a = np.concatenate([(u + v) % p4, (u - v) % p4], axis=2)
        return a.reshape(k, n) % p2

    def ntt(self, a: np.ndarray, idx: list[int]) -> np.ndarray:
        p = self.primes[idx][:, None]
        return self._transform(a * self.psi[idx] % p, idx, self.fwd)

    def intt(self, a: np.ndarray, idx: list[int]) -> np.ndarray:
        p = self.primes[idx][:, None]
        out = self._transform(a, idx, self.inv) * self.n_inv[idx][:, None] % p
        return out * self.psi_inv[idx] % p

    def mul(self, a: np.ndarray, b: np.ndarray, idx: list[int]) -> np.ndarray:
        p = self.primes[idx][:, None]
        return self.intt(self.ntt(a, idx) * self.ntt(b, idx) % p, idx)


@lru_cache(maxsize=16)
def _ring_for(n: int, depth: int) -> tuple[_Ring, list[int]]:
    two_n = 2 * n
    scale_primes = _primes_below(2 ** SCALE_BITS, depth, two_n, set())
    base = _primes_below(2 ** 31, 2, two_n, set(scale_primes))
    special = _primes_below(base[-1] - 1, 1, two_n, set(scale_primes) | set(base))
    chain = base + scale_primes + special
    return _Ring(n, chain), chain


def _centered(x: np.ndarray, p: int) -> np.ndarray:
    x = x % p
    return np.where(x > p // 2, x - p, x)


class LatticeBackend(HeBackend):
    kind = "lattice"

    def __init__(self, params: HeParams, seed: int | None = 0):
        if not lattice_available():
            raise BackendUnavailable("lattice backend disabled (REPSIM_LATTICE=0)")
        super().__init__(params)
        self.rng = np.random.default_rng(seed)
        n = 16
        while n // 2 < params.slot_count:
            n *= 2
        self.n = n
        self.depth = params.depth_budget
        self.ring, self.chain = _ring_for(n, self.depth)
        self.delta = float(2 ** SCALE_BITS)
        self.special = len(self.chain) - 1
        floor = self.noise_floor()
        if params.epsilon < floor:
            raise InvalidParams(
                f"epsilon={params.epsilon} is below the lattice noise floor {floor:.3g} for N={n}")
        self._issued: set[str] = set()
        self._ek_cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        two_n = 2 * n
        self._slot_t = np.array([(pow(5, j, two_n) - 1) // 2 for j in range(n // 2)])
        self._conj_t = np.array([(two_n - pow(5, j, two_n) - 1) // 2 for j in range(n // 2)])
        k = np.arange(n)
        self._zeta = np.exp(1j * np.pi * k / n)

    def noise_floor(self) -> float:
        n = self.n
        fresh = 10 * SIGMA * math.sqrt(n * (4 * n / 3 + 1))
        rounding = 2 * n
        return (fresh + rounding) / self.delta

    # -- encoding ------------------------------------------------------------

    def _basis(self, level: int) -> list[int]:
        return list(range(2 + level))

    def _encode(self, values: Sequence[float], scale: float, level: int) -> np.ndarray:
        z = np.zeros(self.n // 2, dtype=complex)
        z[: len(values)] = values
        z_all = np.zeros(self.n, dtype=complex)
        z_all[self._slot_t] = z
        z_all[self._conj_t] = np.conj(z)
        y = np.fft.fft(z_all) / self.n
        m = np.real(y / self._zeta)
        coeffs = np.rint(m * scale).astype(np.int64)
        idx = self._basis(level)
        return coeffs[None, :] % self.ring.primes[idx][:, None]

    def _decode(self, residues: np.ndarray, level: int, scale: float, used: int) -> list[float]:
        idx = self._basis(level)
        primes = [self.chain[i] for i in idx]
        q = math.prod(primes)
        acc = [0] * self.n
        for row, p in zip(residues, primes):
            qi = q // p
            factor = qi * pow(qi, -1, p)
            for j, r in enumerate(row.tolist()):
                acc[j] += r * factor
        half = q // 2
        m = np.array([float(((c % q) - q) if (c % q) > half else (c % q)) for c in acc]) / scale
        z_all = np.fft.ifft(m * self._zeta) * self.n
        return np.real(z_all[self._slot_t][:used]).tolist()

    # -- randomness ----------------------------------------------------------

    def _ternary(self) -> np.ndarray:
        return self.rng.integers(-1, 2, self.n).astype(np.int64)

    def _gauss(self) -> np.ndarray:
        return np.rint(self.rng.normal(0.0, SIGMA, self.n)).astype(np.int64)

    def _uniform(self, idx: list[int]) -> np.ndarray:
        return np.stack([self.rng.integers(0, self.chain[i], self.n, dtype=np.int64) for i in idx])

    def _lift(self, small: np.ndarray, idx: list[int]) -> np.ndarray:
        return small[None, :] % self.ring.primes[idx][:, None]

    # -- keys ----------------------------------------------------------------

    def keygen(self) -> KeyMaterial:
        self.counter["keygen"] += 1
        while True:
            key_id = "key:" + self.rng.bytes(12).hex()
            if key_id not in self._issued:
                break
        self._issued.add(key_id)
        ring = self.ring
        full = self._basis(self.depth)
        ext = full + [self.special]
        s = self._ternary()
        s_full = self._lift(s, full)
        p_full = ring.primes[full][:, None]
        a = self._uniform(full)
        b = (-ring.mul(a, s_full, full) + self._lift(self._gauss(), full)) % p_full
        s_ext = self._lift(s, ext)
        p_ext = ring.primes[ext][:, None]
        s2 = ring.mul(s_ext, s_ext, ext)
        special = int(self.chain[self.special])
        ek_b, ek_a = [], []
        for j in full:
            aj = self._uniform(ext)
            bj = (-ring.mul(aj, s_ext, ext) + self._lift(self._gauss(), ext)) % p_ext
            row = ext.index(j)
            bj[row] = (bj[row] + (special % self.chain[j]) * s2[row]) % self.chain[j]
            ek_b.append(bj)
            ek_a.append(aj)
        pk_bytes = np.stack([b, a]).astype("<i8").tobytes()
        sk_bytes = s.astype("<i1").tobytes()
        ek_bytes = np.stack([np.stack(ek_b), np.stack(ek_a)]).astype("<i8").tobytes()
        return KeyMaterial(key_id, PublicKey(key_id, pk_bytes), SecretKey(key_id, sk_bytes),
                           EvalKey(key_id, ek_bytes))

    def _pk(self, pk: PublicKey) -> tuple[np.ndarray, np.ndarray]:
        arr = np.frombuffer(pk.data, dtype="<i8").reshape(2, self.depth + 2, self.n)
        return arr[0], arr[1]

    def _ek(self, ek: EvalKey) -> tuple[np.ndarray, np.ndarray]:
        cached = self._ek_cache.get(ek.key_id)
        if cached is None:
            k = self.depth + 2
            arr = np.frombuffer(ek.data, dtype="<i8").reshape(2, k, k + 1, self.n)
            cached = (arr[0], arr[1])
            self._ek_cache[ek.key_id] = cached
        return cached

    # -- payload -------------------------------------------------------------

    def _pack(self, key_id: str, level: int, bound: float, used: int, scale: float,
              magnitude: float, c0: np.ndarray, c1: np.ndarray) -> Ciphertext:
        rows = c0.shape[0]
        body = (_HDR.pack(_MAGIC, used, level, rows, self.n, scale, magnitude)
                + c0.astype("<i8").tobytes() + c1.astype("<i8").tobytes())
        digest = self._digest(key_id, level, bound, body)
        return Ciphertext(key_id=key_id, level=level, error_bound=bound, payload=body + digest)

    @staticmethod
    def _digest(key_id: str, level: int, bound: float, body: bytes) -> bytes:
        meta = key_id.encode() + struct.pack("<qd", level, bound)
        return hashlib.sha256(meta + body).digest()[:_DIGEST]

    def _unpack(self, ct: Ciphertext):
        payload = ct.payload
        if len(payload) < _HDR.size + _DIGEST:
            raise CorruptedCiphertext("payload too short")
        body, digest = payload[:-_DIGEST], payload[-_DIGEST:]
        if digest != self._digest(ct.key_id, ct.level, ct.error_bound, body):
            raise CorruptedCiphertext("payload digest mismatch")
        magic, used, level, rows, n, scale, magnitude = _HDR.unpack_from(body)
        if magic != _MAGIC or n != self.n or level != ct.level or rows != level + 2:
            raise CorruptedCiphertext("malformed lattice payload")
        polys = np.frombuffer(body[_HDR.size:], dtype="<i8")
        if polys.size != 2 * rows * n:
            raise CorruptedCiphertext("malformed lattice payload")
        polys = polys.reshape(2, rows, n)
        return used, scale, magnitude, polys[0].copy(), polys[1].copy()

    # -- primitive steps -----------------------------------------------------

    def _rescale(self, x: np.ndarray, level: int) -> np.ndarray:
        top = 1 + level
        qt = self.chain[top]
        xt = _centered(x[top], qt)
        out = np.empty((top, self.n), dtype=np.int64)
        for i in range(top):
            qi = self.chain[i]
            out[i] = ((x[i] - xt % qi) % qi) * pow(qt, -1, qi) % qi
        return out

    def _relin(self, d2: np.ndarray, level: int, ek: EvalKey) -> tuple[np.ndarray, np.ndarray]:
        ring = self.ring
        basis = self._basis(level)
        ext = basis + [self.special]
        rows = basis + [self.depth + 2]
        p_ext = ring.primes[ext][:, None]
        ek_b, ek_a = self._ek(ek)
        acc0 = np.zeros((len(ext), self.n), dtype=np.int64)
        acc1 = np.zeros_like(acc0)
        for j in basis:
            digit = _centered(d2[j], self.chain[j])
            dig = ring.ntt(digit[None, :] % p_ext, ext)
            acc0 = (acc0 + dig * ring.ntt(ek_b[j][rows], ext)) % p_ext
            acc1 = (acc1 + dig * ring.ntt(ek_a[j][rows], ext)) % p_ext
        out = []
        special = self.chain[self.special]
        for acc in (ring.intt(acc0, ext), ring.intt(acc1, ext)):
            xp = _centered(acc[-1], special)
            res = np.empty((len(basis), self.n), dtype=np.int64)
            for i in basis:
                qi = self.chain[i]
                res[i] = ((acc[i] - xp % qi) % qi) * pow(special, -1, qi) % qi
            out.append(res)
        return out[0], out[1]

    def _drop(self, c: np.ndarray, level: int) -> np.ndarray:
        return c[: 2 + level]

    def _align(self, state, target_level: int, target_scale: float):
        """Bring ``state`` down to ``target_level`` with scale close to ``target_scale``."""
        used, scale, mag, c0, c1, level = state
        if level == target_level:
            return state, False
        c0, c1 = self._drop(c0, target_level + 1), self._drop(c1, target_level + 1)
        qt = self.chain[1 + target_level + 1]
        const = int(round(qt * target_scale / scale))
        idx = self._basis(target_level + 1)
        p = self.ring.primes[idx][:, None]
        cr = np.array([const % int(pp) for pp in self.ring.primes[idx]], dtype=np.int64)[:, None]
        c0 = self._rescale(c0 * cr % p, target_level + 1)
        c1 = self._rescale(c1 * cr % p, target_level + 1)
        new_scale = scale * const / qt
        return (used, new_scale, mag, c0, c1, target_level), True

    # -- public operations ---------------------------------------------------

    def encrypt(self, pk: PublicKey, values: Sequence[float]) -> Ciphertext:
        vals = check_plain(values, self.params.slot_count)
        self.counter["encrypt"] += 1
        level = self.depth
        idx = self._basis(level)
        ring = self.ring
        p = ring.primes[idx][:, None]
        b, a = self._pk(pk)
        v = self._lift(self._ternary(), idx)
        m = self._encode(vals, self.delta, level)
        c0 = (ring.mul(b, v, idx) + self._lift(self._gauss(), idx) + m) % p
        c1 = (ring.mul(a, v, idx) + self._lift(self._gauss(), idx)) % p
        magnitude = max(1.0, max((abs(x) for x in vals), default=0.0))
        return self._pack(pk.key_id, level, float(self.params.epsilon), len(vals), self.delta,
                          magnitude, c0, c1)

    def decrypt(self, sk: SecretKey, ct: Ciphertext) -> list[float]:
        if sk.key_id != ct.key_id:
            raise KeyMismatch(f"secret key {sk.key_id} cannot open ciphertext under {ct.key_id}")
        used, scale, _, c0, c1 = self._unpack(ct)
        self.counter["decrypt"] += 1
        idx = self._basis(ct.level)
        s = self._lift(np.frombuffer(sk.data, dtype="<i1").astype(np.int64), idx)
        m = (c0 + self.ring.mul(c1, s, idx)) % self.ring.primes[idx][:, None]
        return self._decode(m, ct.level, scale, used)

    def add(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        key_id = same_key(a.key_id, b.key_id)
        sa = (*self._unpack(a), a.level)
        sb = (*self._unpack(b), b.level)
        self.counter["he_add"] += 1
        eps = float(self.params.epsilon)
        bound = a.error_bound + b.error_bound
        if sa[-1] > sb[-1]:
            sa, adjusted = self._align(sa, sb[-1], sb[1])
            bound += eps if adjusted else 0.0
        elif sb[-1] > sa[-1]:
            sb, adjusted = self._align(sb, sa[-1], sa[1])
            bound += eps if adjusted else 0.0
        used_a, scale_a, mag_a, a0, a1, level = sa
        used_b, scale_b, mag_b, b0, b1, _ = sb
        bound += mag_b * abs(scale_b / scale_a - 1.0)
        p = self.ring.primes[self._basis(level)][:, None]
        return self._pack(key_id, level, bound, max(used_a, used_b), scale_a, mag_a + mag_b,
                          (a0 + b0) % p, (a1 + b1) % p)

    def mul(self, a: Ciphertext, b: Ciphertext, ek: EvalKey) -> Ciphertext:
        key_id = same_key(a.key_id, b.key_id, ek.key_id)
        level = min(a.level, b.level)
        if level < 1:
            raise DepthExhausted("no multiplicative depth left")
        used_a, scale_a, mag_a, a0, a1 = self._unpack(a)
        used_b, scale_b, mag_b, b0, b1 = self._unpack(b)
        self.counter["he_mul"] += 1
        a0, a1, b0, b1 = (self._drop(x, level) for x in (a0, a1, b0, b1))
        ring = self.ring
        idx = self._basis(level)
        p = ring.primes[idx][:, None]
        fa0, fa1, fb0, fb1 = (ring.ntt(x, idx) for x in (a0, a1, b0, b1))
        d0 = ring.intt(fa0 * fb0 % p, idx)
        d1 = ring.intt((fa0 * fb1 % p + fa1 * fb0 % p) % p, idx)
        d2 = ring.intt(fa1 * fb1 % p, idx)
        r0, r1 = self._relin(d2, level, ek)
        c0 = self._rescale((d0 + r0) % p, level)
        c1 = self._rescale((d1 + r1) % p, level)
        eps = float(self.params.epsilon)
        ea, eb = a.error_bound, b.error_bound
        bound = mag_a * eb + mag_b * ea + ea * eb + eps
        scale = scale_a * scale_b / self.chain[1 + level]
        return self._pack(key_id, level - 1, bound, max(used_a, used_b), scale, mag_a * mag_b, c0, c1)

    def scalar(self, op: str, a: Ciphertext, plain: Sequence[float]) -> Ciphertext:
        used, scale, mag, c0, c1 = self._unpack(a)
        vals = self._check_scalar(op, used, plain)
        eps = float(self.params.epsilon)
        peak = max((abs(v) for v in vals), default=0.0)
        if op == "add":
            self.counter["he_scalar"] += 1
            p = self.ring.primes[self._basis(a.level)][:, None]
            m = self._encode(vals, scale, a.level)
            return self._pack(a.key_id, a.level, a.error_bound + eps, used, scale, mag + peak,
                              (c0 + m) % p, c1)
        if a.level < 1:
            raise DepthExhausted("plain multiplication needs one level in the lattice backend")
        self.counter["he_scalar"] += 1
        idx = self._basis(a.level)
        top = self.chain[1 + a.level]
        m = self._encode(vals, float(top), a.level)
        c0 = self._rescale(self.ring.mul(c0, m, idx), a.level)
        c1 = self._rescale(self.ring.mul(c1, m, idx), a.level)
        factor = max(1.0, peak)
        return self._pack(a.key_id, a.level - 1, a.error_bound * factor + eps, used, scale,
                          mag * factor, c0, c1)

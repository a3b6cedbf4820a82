"""Homomorphic arithmetic layer.

>>> from repsim.he import HeParams, make_backend
>>> be = make_backend(HeParams(slot_count=8, depth_budget=3, epsilon=1e-6), seed=1)
>>> km = be.keygen()
>>> ct = be.add(be.encrypt(km.public_key, [0.3]), be.encrypt(km.public_key, [0.4]))
>>> abs(be.decrypt(km.secret_key, ct)[0] - 0.7) <= ct.error_bound
True
"""

from repsim.he.core import (
    BACKEND_KINDS,
    Ciphertext,
    EvalKey,
    HeBackend,
    HeParams,
    KeyMaterial,
    PublicKey,
    SecretKey,
    noise_report,
)
from repsim.he.lattice import LatticeBackend, lattice_available
from repsim.he.simulation import SimulationBackend


def make_backend(params: HeParams, seed: int | None = 0) -> HeBackend:
    if params.backend_kind == "lattice":
        return LatticeBackend(params, seed=seed)
    return SimulationBackend(params, seed=seed)


__all__ = [
    "BACKEND_KINDS",
    "Ciphertext",
    "EvalKey",
    "HeBackend",
    "HeParams",
    "KeyMaterial",
    "LatticeBackend",
    "PublicKey",
    "SecretKey",
    "SimulationBackend",
    "lattice_available",
    "make_backend",
    "noise_report",
]

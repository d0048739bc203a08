"""Deterministic seed derivation.

All randomness in the package flows from a single master seed.  Component
streams are derived by hashing a component label together with the master
seed, so adding or reordering components never perturbs the streams of the
others.
"""

import hashlib

import numpy as np

__all__ = ["derive_seed", "rng_for"]


def derive_seed(seed: int, label: str) -> int:
    """Derive a stable 63-bit sub-seed from ``seed`` and a component label."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def rng_for(seed: int, label: str) -> np.random.Generator:
    """A ``numpy`` generator seeded from ``derive_seed(seed, label)``."""
    return np.random.default_rng(derive_seed(seed, label))

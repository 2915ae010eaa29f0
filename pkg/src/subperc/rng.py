"""Seed derivation.

All randomness flows from numpy's PCG64 generator. Replication seeds are
derived with a keyed BLAKE2b hash so that serial and parallel runs agree and
results do not depend on platform hash randomisation.
"""
from __future__ import annotations

import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def derive_seed(master_seed: int, *labels) -> int:
    """Stable 64-bit seed from a master seed and any number of labels."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master_seed) & SEED_MASK).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "little")


def replication_seeds(master_seed: int, name: str, count: int) -> list[int]:
    return [derive_seed(master_seed, name, i) for i in range(count)]


def make_rng(seed: int, *stream) -> np.random.Generator:
    """Generator for ``seed``; ``stream`` labels select an independent substream."""
    if stream:
        seed = derive_seed(seed, *stream)
    return np.random.Generator(np.random.PCG64(int(seed) & SEED_MASK))

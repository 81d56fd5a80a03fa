"""Deterministic seed derivation.

Every stochastic step in the pipeline draws from a stream derived from one
64-bit run seed plus a label path (module, purpose, fold, ...), so any part
of a run can be reproduced in isolation and parallel execution matches
serial execution bit for bit.
"""

from __future__ import annotations

import hashlib

import numpy as np

DEFAULT_SEED = 42

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *path: object) -> int:
    """Derive a child 64-bit seed from ``seed`` and a label path."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed) & _MASK64).encode())
    for part in path:
        h.update(b"/")
        h.update(repr(part).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(seed: int, *path: object) -> np.random.Generator:
    """A fresh PCG64 generator for the given seed and label path."""
    return np.random.default_rng(derive_seed(seed, *path))

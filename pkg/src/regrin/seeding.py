"""Seeded randomness helpers.

Every stochastic routine in this package draws from numpy's PCG64 bit
generator, and multi-stage pipelines derive per-stage seeds by hashing a
stage label together with the master seed.  Both choices are portable
across platforms and python/numpy versions, so one master seed pins every
generated artifact bit-for-bit.
"""

from __future__ import annotations

import hashlib

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Return the package-wide generator (PCG64) for the given seed."""
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(master_seed: int, label: str) -> int:
    """Derive an independent sub-seed for a named pipeline stage.

    The split function is fixed: the first 8 bytes (big-endian) of
    SHA-256 over the UTF-8 encoding of ``"{label}:{master_seed}"``.
    """
    digest = hashlib.sha256(f"{label}:{master_seed}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def geometric(rng: np.random.Generator, mean: float) -> int:
    """Sample from Geometric(1/mean) with support {1, 2, ...}.

    Implemented by inverse-CDF on a single uniform draw so the sampled
    stream does not depend on numpy's internal geometric implementation.
    """
    if mean <= 1.0:
        return 1
    pi = 1.0 / mean
    u = rng.random()
    return 1 + int(np.floor(np.log1p(-u) / np.log1p(-pi)))

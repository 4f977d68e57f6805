"""Domain-separated random streams.

Every random draw in the package comes from ``numpy.random.PCG64`` seeded by a
``SeedSequence(seed, spawn_key=(domain, *path))``.  PCG64 output is stable
across platforms and numpy releases, so a seed pins every result bit for bit.
Separate domains mean, for example, that the bias vector does not move when the
number of users changes.
"""

from __future__ import annotations

import numpy as np

BIAS = 1
CODEBOOK = 2
ATTACK = 3
LSH = 4
TRIAL = 5
COLLUDERS = 6
MONTE_CARLO = 7

SEED_MASK = 2**64 - 1


def stream(seed: int, domain: int, *path: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=(domain, *path))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, domain: int, *path: int) -> int:
    """A fresh 64-bit seed for a sub-task (e.g. one experiment trial)."""
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=(domain, *path))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)

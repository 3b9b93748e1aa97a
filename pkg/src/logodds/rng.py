"""Seeded random streams.

Replicate ``r`` of a seeded computation draws from a PCG64 generator keyed by
``SeedSequence(seed, spawn_key=(r,))``. Streams are independent across both
seeds and replicates, so results do not depend on the order in which
replicates run, and neighbouring seeds never share replicates (as they would
under ``seed XOR r``).
"""

import os

import numpy as np

MASK64 = (1 << 64) - 1
SEED_ENV = "LOGODDS_SEED"


def stream(seed: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & MASK64, spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def default_seed(fallback: int = 20161010) -> int:
    value = os.environ.get(SEED_ENV)
    return int(value) if value else fallback

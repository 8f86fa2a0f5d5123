"""Counter-based seed derivation.

All randomness in the package is keyed by a master seed plus a tuple of
integer coordinates, so results never depend on execution order or on how
work is split across threads.
"""

import numpy as np


def seed_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))


def derive_seed(master_seed: int, *key: int) -> int:
    """A 63-bit integer seed for the stream at ``key`` under ``master_seed``."""
    lo, hi = seed_sequence(master_seed, *key).generate_state(2, dtype=np.uint32)
    return (int(hi) << 32 | int(lo)) & ((1 << 63) - 1)


def rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(master_seed, *key))

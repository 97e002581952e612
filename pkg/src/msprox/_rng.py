"""Seeded random streams.

All randomness goes through NumPy's PCG64 bit generator seeded via
``SeedSequence``, which is portable across platforms and NumPy versions.
"""

import numpy as np


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def derive_seed(*keys) -> int:
    """Deterministic 63-bit seed from a tuple of nonnegative integers."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))

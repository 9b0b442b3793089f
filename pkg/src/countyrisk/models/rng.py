"""Seeded random streams.

Every stream is a Philox-4x64 counter-based generator keyed by a base seed
and a tuple of integers (tree index, grid index, fold index, ...). Streams
are independent of each other and of the order in which they are created,
so parallel and sequential fitting produce the same model.
"""

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


def derive_seed(seed: int, *key: int) -> int:
    """A 63-bit integer seed for the sub-task identified by ``key``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))

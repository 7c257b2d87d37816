"""Per-path random streams.

Path ``i`` of an ensemble seeded with ``seed`` always draws from a Philox
generator keyed by ``(seed, i)``.  The stream therefore does not depend on how
paths are batched or scheduled across threads.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def path_rng(seed, index):
    """Return the counter-based generator owned by path ``index``."""
    if seed is None:
        raise ValueError("a seed is mandatory for reproducible path streams")
    seed = int(seed)
    index = int(index)
    if seed < 0 or index < 0:
        raise ValueError("seed and path index must be non-negative")
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, index & _MASK64]))


def block_bounds(n_paths, block_size):
    """Split ``range(n_paths)`` into fixed-size half-open blocks."""
    return [(s, min(s + block_size, n_paths)) for s in range(0, n_paths, block_size)]

"""Counter-based random streams keyed by (seed, key...).

Each stream is a Philox generator whose key is derived from the run seed and
an integer path (stream family, sample index, ...).  Streams never share
state, so samples can be generated in any order or in parallel and still
reproduce bit for bit.
"""

import numpy as np

# stream families
ENSEMBLE = 0
ANDERSON_1D = 1
ANDERSON_2D = 2

U64_MAX = 2**64 - 1


def check_seed(seed):
    seed = int(seed)
    if not 0 <= seed <= U64_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream(seed, *key):
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def sibling_seed(seed):
    """Seed of the second run in a two-run comparison."""
    return check_seed(seed) ^ 1

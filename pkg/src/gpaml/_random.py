"""Seed plumbing shared by every stochastic routine.

All randomness flows from one integer master seed.  Child generators are
keyed by structural indices (block, replicate, step, ...) so that work can be
reordered or parallelised without changing results.
"""

import numpy as np


def as_generator(rng=None):
    """Return a ``numpy.random.Generator`` for an int, SeedSequence or Generator."""
    return np.random.default_rng(rng)


def master_seed(rng=None):
    """Reduce ``rng`` to a plain integer seed.

    Integers pass through unchanged; generators are consumed once.
    """
    if isinstance(rng, (int, np.integer)) and not isinstance(rng, bool):
        if rng < 0:
            raise ValueError(f"seed must be nonnegative, got {rng}")
        return int(rng)
    return int(as_generator(rng).integers(0, 2**63 - 1))


def derive(seed, *keys):
    """Child generator for ``seed`` keyed by nonnegative integer ``keys``."""
    ss = np.random.SeedSequence(master_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, *keys):
    """Like :func:`derive` but returns an int, for APIs that want a seed."""
    ss = np.random.SeedSequence(master_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))

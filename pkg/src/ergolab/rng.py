"""Project-wide random number generation.

All randomized operations in this package are pure functions of their inputs
and a 64-bit seed.  Randomness comes from the Philox counter-based generator,
which is deterministic integer arithmetic: the same seed reproduces the same
stream bit-for-bit on a given platform.  Derived streams (per-word seeds for
multi-word experiments, per-shard seeds for parallel runs) are drawn from the
parent stream so that sharded runs merge to a schedule-independent result.
"""

from __future__ import annotations

import numpy as np

_SEED_MOD = 2**63


def make_rng(seed: int) -> np.random.Generator:
    """Return the canonical generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & (2**64 - 1)))


def derive_seeds(seed: int, count: int) -> list[int]:
    """Derive `count` child seeds from a parent seed, deterministically.

    Child seeds are the first `count` 63-bit integers of the parent stream;
    they are stable under extending `count`.
    """
    rng = make_rng(seed)
    return [int(s) for s in rng.integers(0, _SEED_MOD, size=count)]

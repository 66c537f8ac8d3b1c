"""Deterministic, splittable random streams.

Every component (each env instance, each worker, the learner) gets its own
stream derived from the experiment seed, so the same seed and the same call
sequence always reproduce the same numbers regardless of scheduling.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


def spawn_rngs(seed: int, n: int, stream: str = "") -> list[np.random.Generator]:
    """n independent generators for a named stream under one experiment seed."""
    entropy = [seed] + [ord(c) for c in stream]
    root = np.random.SeedSequence(entropy)
    return [np.random.default_rng(s) for s in root.spawn(n)]

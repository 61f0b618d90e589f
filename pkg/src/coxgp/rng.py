"""Seed handling helpers shared by the samplers."""

from __future__ import annotations

import numpy as np


def as_generator(seed) -> np.random.Generator:
    """Coerce an int seed, SeedSequence or Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_seeds(seed: int, k: int) -> list[np.random.SeedSequence]:
    """Independent child seed sequences for replicate runs."""
    return np.random.SeedSequence(seed).spawn(k)

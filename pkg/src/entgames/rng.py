"""Deterministic random streams.

A single user seed fans out into independent substreams keyed by small
integer ids, so every component draws from its own counter-based stream and
results do not depend on evaluation order or worker count.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *ids: int) -> np.random.Generator:
    """Generator for the substream (seed, *ids)."""
    entropy = [int(seed)] + [int(i) for i in ids]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=entropy)))


def as_generator(seed_or_rng: int | np.random.Generator, *ids: int) -> np.random.Generator:
    """Accept either a seed or a ready generator; seeds are fanned out by ids."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return stream(int(seed_or_rng), *ids)

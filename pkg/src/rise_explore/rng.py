"""Seeded random streams.

Every stochastic routine takes a ``numpy.random.Generator``. Streams are PCG64
generators seeded through ``SeedSequence``; a run index is mixed into the seed
by ``SeedSequence([seed, run_index])`` which hashes both words, so streams for
different runs of the same base seed are statistically independent and do not
depend on execution order.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` and optional stream indices."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(s) for s in stream)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def as_rng(rng: np.random.Generator | int | None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(0 if rng is None else rng)

"""Deterministic random streams.

All randomness in the package flows through `make_rng`. The generator is
counter-based (Philox), so streams keyed by nearby seeds (base, base+1, ...)
are statistically independent, which is what the per-replicate seeding of the
Monte Carlo runners relies on.
"""
from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Philox stream for `seed`; distinct seeds give independent streams."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))

"""Seeded random streams.

Every random draw in the package comes from ``substream(seed, *keys)``: the
64-bit root seed plus integer keys (purpose, player, cell, ...) are fed to
``numpy.random.SeedSequence`` as entropy and spawn key, so streams are
independent of call order and of each other.
"""
from __future__ import annotations

import numpy as np

# purpose keys
INIT = 0
DEVIATIONS = 1
PROBE = 2
TESTS = 3


def substream(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)

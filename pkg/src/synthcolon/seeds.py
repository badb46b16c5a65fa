"""Deterministic RNG stream derivation.

Every random draw in the package comes from a Generator derived here, so a
single (seed, domain, *extra) tuple pins the draw regardless of call order
or thread scheduling.
"""

from __future__ import annotations

import numpy as np

# domain tags: one per independent stream family
DOMAIN_CENTERLINE = 0
DOMAIN_FOLDS = 1
DOMAIN_POLYPS = 2
DOMAIN_CAMERA = 3
DOMAIN_SURFACE_NOISE = 4
DOMAIN_TEXTURE = 5
DOMAIN_POLYP_SHAPE = 6
DOMAIN_ANCHOR_REDRAW = 7
DOMAIN_PROFILE = 8


def derive_rng(seed: int, *domain: int) -> np.random.Generator:
    """Independent Generator for (seed, domain...)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(d) for d in domain))
    return np.random.Generator(np.random.PCG64(ss))


def splitmix64(x: int) -> int:
    """One splitmix64 step; maps any 64-bit int to a well-mixed 64-bit int."""
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)

"""Per-member random streams derived from one manifest seed with splitmix64."""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1

# fixed tags so adding a role later never shifts existing streams
ROLES = {
    "train": 1,
    "test": 2,
    "embed": 3,
    "surrogate": 4,
    "trajectory": 5,
    "sample": 6,
    "truth": 7,
}


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def member_seed(seed, role, index=0):
    """splitmix(splitmix(splitmix(seed) ^ role) ^ index), a 64-bit integer."""
    if role not in ROLES:
        raise KeyError(f"unknown stream role {role!r}")
    h = splitmix64(int(seed) & _MASK)
    h = splitmix64(h ^ ROLES[role])
    return splitmix64(h ^ (int(index) & _MASK))


def stream(seed, role, index=0):
    return np.random.default_rng(member_seed(seed, role, index))

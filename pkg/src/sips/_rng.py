"""Deterministic seed derivation for substreams.

All stochastic components draw their randomness from 64-bit seeds derived
with SplitMix64-style mixing, so that every (master seed, index path) pair
maps to a fixed substream independent of execution order or parallel
scheduling.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 finalizer: avalanching 64-bit hash of an integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Derive a substream seed from a master seed and an index path.

    Distinct paths give statistically independent streams; the same path
    always gives the same seed.
    """
    s = mix64((int(master) & MASK64) ^ 0x5851F42D4C957F2D)
    for p in path:
        s = mix64((s + ((int(p) + 1) * GOLDEN & MASK64)) & MASK64)
    return s

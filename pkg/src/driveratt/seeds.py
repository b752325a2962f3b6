"""Deterministic seed derivation.

Every stage that needs randomness derives its generator from the run's
master seed through splitmix64 mixing, so seeds are reproducible across
platforms and independent of processing order. Subject-level streams use
master_seed XOR splitmix64(subject_index).
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return (x ^ (x >> 31)) & _MASK


def mix_seed(*parts: int) -> int:
    """Fold integer parts into one 64-bit seed, order-sensitive."""
    acc = 0
    for p in parts:
        acc = splitmix64((acc ^ (int(p) & _MASK)) & _MASK)
    return acc


def subject_seed(master_seed: int, subject_index: int) -> int:
    return (int(master_seed) & _MASK) ^ splitmix64(subject_index)

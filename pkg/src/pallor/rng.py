"""Deterministic pseudo-random generator used everywhere randomness is needed.

The generator is SplitMix64: a counter-based 64-bit mixer with the constants

    GAMMA = 0x9E3779B97F4A7C15
    M1    = 0xBF58476D1CE4E5B9
    M2    = 0x94D049BB133111EB

The k-th raw output for seed ``s`` is ``mix64(s + (k+1)*GAMMA)`` where
``mix64`` xor-shifts by 30/27/31 and multiplies by M1/M2 (all mod 2**64).
Because outputs depend only on (seed, counter), vectorised block generation
is bit-identical to drawing scalars one at a time, and independent workers
can generate disjoint ranges of the same stream.

Derived values:

* ``uniform01``: top 53 bits scaled by 2**-53, in [0, 1).
* ``normal``: Box-Muller; each normal consumes exactly two raw outputs
  (the sine half is discarded so scalar and block draws stay aligned).
"""

from __future__ import annotations

import math

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_MASK = (1 << 64) - 1
_INV_2_53 = 2.0**-53


def mix64(z: int) -> int:
    """Finalising mixer of SplitMix64 (pure function of a 64-bit state)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def derive_seed(base: int, index: int) -> int:
    """Deterministic per-item seed: the ``index``-th raw output of ``base``.

    Used to give every dataset sample its own stream so parallel and serial
    generation agree byte for byte.
    """
    return mix64(base + (index + 1) * GAMMA)


class SplitMix64:
    """Stateful view over the counter-based stream for seed ``seed``.

    Scalar and ``*_array`` methods consume the same underlying counter, so
    any interleaving of the two produces identical values.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return mix64(self.seed + self.counter * GAMMA)

    def u64_array(self, n: int) -> np.ndarray:
        ks = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        z = np.uint64(self.seed) + ks * np.uint64(GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        return z ^ (z >> np.uint64(31))

    def uniform01(self) -> float:
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform01()

    def uniform01_array(self, n: int) -> np.ndarray:
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def uniform_array(self, n: int, lo: float, hi: float) -> np.ndarray:
        return lo + (hi - lo) * self.uniform01_array(n)

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        u1 = ((self.next_u64() >> 11) + 1) * _INV_2_53  # in (0, 1]
        u2 = (self.next_u64() >> 11) * _INV_2_53
        z0 = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return mu + sigma * z0

    def normal_array(self, n: int, mu: float = 0.0, sigma: float = 1.0) -> np.ndarray:
        raw = self.u64_array(2 * n) >> np.uint64(11)
        u1 = (raw[0::2].astype(np.float64) + 1.0) * _INV_2_53
        u2 = raw[1::2].astype(np.float64) * _INV_2_53
        z0 = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return mu + sigma * z0

    def below(self, n: int) -> int:
        """Integer in [0, n). Modulo bias is < n/2**64, irrelevant here."""
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        idx = list(range(n))
        self.shuffle(idx)
        return idx

"""Seeded pseudo-random generator used everywhere randomness is needed.

The generator is SplitMix64, a counter-based member of the xorshift-multiply
family (the seeding generator of the xoshiro line).  Draw ``i`` of a stream
with base state ``s`` is

    out(i) = mix64(s + (i + 1) * 0x9E3779B97F4A7C15)   (mod 2**64)

    mix64(z):
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9       (mod 2**64)
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB       (mod 2**64)
        return z ^ (z >> 31)

Because the update is counter-based rather than recurrent, blocks of draws
vectorize with NumPy uint64 arithmetic while remaining bit-identical to the
scalar definition above.  Floats take the top 53 bits of each word; normals
use the Box-Muller transform on consecutive uniform pairs.

Independent child streams are derived by hashing a tag into the base state
(``child``), so e.g. per-image augmentation streams do not depend on the
order in which other draws were made.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """The SplitMix64 finalizer on a single 64-bit word."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _mix64_block(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """Deterministic stream of draws from a 64-bit seed."""

    def __init__(self, seed: int):
        self._base = seed & _MASK
        self._count = 0

    def child(self, tag: int) -> "Rng":
        """Derive an independent stream keyed by (this seed, tag)."""
        return Rng(mix64(self._base ^ mix64((tag & _MASK) + _GOLDEN)))

    def _words(self, n: int) -> np.ndarray:
        start = (self._base + (self._count + 1) * _GOLDEN) & _MASK
        self._count += n
        counters = np.uint64(start) + np.uint64(_GOLDEN) * np.arange(n, dtype=np.uint64)
        return _mix64_block(counters)

    def uniform(self, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """n floats in [low, high), each from the top 53 bits of one word."""
        u = (self._words(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return low + (high - low) * u

    def normal(self, n: int, std: float = 1.0) -> np.ndarray:
        """n standard-normal draws via Box-Muller on uniform pairs.

        Always consumes 2 * ceil(n/2) words so the stream position does not
        depend on parity.
        """
        m = (n + 1) // 2
        w = self._words(2 * m)
        u1 = ((w[:m] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (w[m:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return std * out

    def integers(self, n: int, upper: int) -> np.ndarray:
        """n integers in [0, upper) via floor(u * upper).

        The modulo bias is upper / 2**53 and is negligible for the desk-scale
        index ranges used here.
        """
        if upper <= 0:
            raise ValueError("upper must be positive")
        u = (self._words(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return np.minimum((u * upper).astype(np.int64), upper - 1)

    def bernoulli(self, n: int, p: float) -> np.ndarray:
        """n booleans, each true with probability p."""
        return self.uniform(n) < p

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of range(n)."""
        out = np.arange(n, dtype=np.int64)
        if n <= 1:
            return out
        u = self.uniform(n - 1)
        for i in range(n - 1, 0, -1):
            j = min(int(u[n - 1 - i] * (i + 1)), i)
            out[i], out[j] = out[j], out[i]
        return out

"""Deterministic pseudo-random numbers for every seeded operation.

The generator is xoshiro256++ with splitmix64 seeding, spelled out exactly
so that an independent implementation can reproduce the streams bit for bit:

* seeding: the four 64-bit state words are four successive splitmix64
  outputs of the seed;
* output: ``rotl64(s0 + s3, 23) + s0``, followed by the xoshiro256 state
  transition (t = s1 << 17; s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3;
  s2 ^= t; s3 = rotl64(s3, 45));
* uniform doubles: ``(next_u64() >> 11) * 2**-53``, in [0, 1);
* standard normals: Box-Muller on pairs of uniforms, the radial uniform
  shifted into (0, 1] as ``((next_u64() >> 11) + 1) * 2**-53``; each pair
  of draws yields ``(r*cos(theta), r*sin(theta))`` consumed in that order;
* bounded integers: rejection sampling on the largest multiple of the
  bound, so there is no modulo bias;
* shuffles: Fisher-Yates swapping from the last index down to 1;
* matrices: filled row-major.

Derived seeds (one per independent stream: weight init, per-epoch shuffles,
latent draws, ...) come from :func:`derive_seed`, a splitmix64-based hash
of the base seed and the stream words.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(value: int) -> int:
    """splitmix64's output scrambler applied to a single 64-bit value."""
    z = (value + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *stream: int) -> int:
    """Hash a base seed and stream identifiers into an independent seed."""
    h = seed & _MASK64
    for word in stream:
        h = mix64(h ^ mix64(word & _MASK64))
    return h


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Rng:
    """xoshiro256++ stream seeded from a single 64-bit integer."""

    def __init__(self, seed: int):
        state = seed & _MASK64
        words = []
        for _ in range(4):
            state = (state + _GOLDEN) & _MASK64
            z = ((state ^ (state >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
            words.append(z ^ (z >> 31))
        self._s = words

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[0] + s[3]) & _MASK64, 23) + s[0]) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        """One double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        nxt = self.next_u64
        for i in range(n):
            out[i] = (nxt() >> 11) * 2.0**-53
        return out

    def uniform_matrix(self, rows: int, cols: int) -> np.ndarray:
        return self.uniforms(rows * cols).reshape(rows, cols)

    def normals(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller."""
        pairs = (n + 1) // 2
        u1 = np.empty(pairs, dtype=np.float64)
        u2 = np.empty(pairs, dtype=np.float64)
        nxt = self.next_u64
        for i in range(pairs):
            u1[i] = ((nxt() >> 11) + 1) * 2.0**-53  # (0, 1]: keeps log finite
            u2[i] = (nxt() >> 11) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * math.pi) * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def normal_matrix(self, rows: int, cols: int) -> np.ndarray:
        return self.normals(rows * cols).reshape(rows, cols)

    def below(self, bound: int) -> int:
        """Unbiased integer in [0, bound)."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        threshold = (_MASK64 + 1) - ((_MASK64 + 1) % bound)
        while True:
            draw = self.next_u64()
            if draw < threshold:
                return draw % bound

    def shuffle_indices(self, n: int) -> np.ndarray:
        """A permutation of arange(n) as intp, by Fisher-Yates."""
        idx = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return np.array(idx, dtype=np.intp)

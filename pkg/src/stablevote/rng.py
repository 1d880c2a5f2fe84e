"""Counter-based random streams with hierarchical key derivation.

Every random quantity in the Monte Carlo core is a pure function of
(master seed, replicate index, tree label, channel).  Keys are derived by
folding those components through the splitmix64 finalizer, and draws are
produced in counter mode from the derived key.  This gives

  * bit-identical results for a fixed master seed no matter how work is
    split across workers,
  * correctness of short-circuit evaluation (skipping a subtree consumes
    nothing from any other node's stream), and
  * coupled samples: two tree attachments that share a channel read
    identical values from it.

splitmix64 in counter mode passes standard statistical batteries; it is
not cryptographic and is not meant to be.
"""

from __future__ import annotations

import math

import numpy as np

_M64 = (1 << 64) - 1
_GOLD = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB

# Channel tags for per-node streams.  Coupled attachments rely on these
# being stable: e.g. a truncated and a full subordinated attachment share
# LIFE/BM/SMALL and differ only in how they consume LARGE.
CH_LIFE = 1      # lifetime of an individual
CH_STABLE = 2    # direct stable/Brownian displacement
CH_BM = 3       # Brownian increments of a subordinated motion
CH_SMALL = 4    # truncated-subordinator jumps and count
CH_LARGE = 5    # large-jump clock, sizes and their displacement
CH_MARK = 6     # Bernoulli mark uniform
CH_VOTE = 7     # leaf vote / marked-coin uniform


def mix64(z: int) -> int:
    """splitmix64 finalizer on a 64-bit word."""
    z &= _M64
    z = ((z ^ (z >> 30)) * _C1) & _M64
    z = ((z ^ (z >> 27)) * _C2) & _M64
    return z ^ (z >> 31)


def fold(key: int, value: int) -> int:
    """Derive a child key from (key, value); order-sensitive chain step."""
    return mix64((key + (value + 1) * _GOLD) & _M64)


def derive_key(*parts: int) -> int:
    """Fold a sequence of integers into one 64-bit key."""
    k = 0x8C5F1B3A2E94D701
    for p in parts:
        k = fold(k, p & _M64)
        p >>= 64
        while p:
            k = fold(k, p & _M64)
            p >>= 64
    return k


_INV53 = 1.0 / (1 << 53)


class Stream:
    """Counter-mode splitmix64 stream with scalar draw helpers.

    Scalar transforms use the math module (numpy scalars are an order of
    magnitude slower); bulk draws go through numpy.
    """

    __slots__ = ("key", "ctr")

    def __init__(self, key: int):
        self.key = key & _M64
        self.ctr = 0

    def u64(self) -> int:
        self.ctr += 1
        return mix64((self.key + self.ctr * _GOLD) & _M64)

    def uniform(self) -> float:
        """Uniform on the open interval (0, 1)."""
        return ((self.u64() >> 11) + 0.5) * _INV53

    def uniforms(self, n: int) -> np.ndarray:
        """n uniforms on (0, 1), vectorized."""
        ctrs = (self.ctr + 1 + np.arange(n, dtype=np.uint64)) * np.uint64(_GOLD)
        self.ctr += n
        z = (np.uint64(self.key) + ctrs) & np.uint64(_M64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_C1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_C2)
        z ^= z >> np.uint64(31)
        return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53

    def exponential(self, mean: float = 1.0) -> float:
        return -mean * math.log(self.uniform())

    def normal(self) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normal_pair(self) -> tuple[float, float]:
        u1 = self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        a = 2.0 * math.pi * u2
        return r * math.cos(a), r * math.sin(a)

    def normals(self, n: int) -> np.ndarray:
        m = (n + 1) // 2
        u = self.uniforms(2 * m)
        r = np.sqrt(-2.0 * np.log(u[:m]))
        a = 2.0 * np.pi * u[m:]
        out = np.empty(2 * m)
        out[0::2] = r * np.cos(a)
        out[1::2] = r * np.sin(a)
        return out[:n]

    def poisson(self, lam: float) -> int:
        """Exact Poisson draw: inversion for small means, PTRS above."""
        if lam <= 0.0:
            return 0
        if lam < 10.0:
            # Knuth inversion by sequential search.
            x = 0
            p = math.exp(-lam)
            s = p
            u = self.uniform()
            while u > s:
                x += 1
                p *= lam / x
                s += p
                if x > 10_000:  # numerically impossible for lam < 10
                    break
            return x
        return self._poisson_ptrs(lam)

    def _poisson_ptrs(self, lam: float) -> int:
        # Hormann's transformed rejection with squeeze (exact).
        slam = math.sqrt(lam)
        loglam = math.log(lam)
        b = 0.931 + 2.53 * slam
        a = -0.059 + 0.02483 * b
        invalpha = 1.1239 + 1.1328 / (b - 3.4)
        vr = 0.9277 - 3.6224 / (b - 2.0)
        while True:
            u = self.uniform() - 0.5
            v = self.uniform()
            us = 0.5 - abs(u)
            k = int(math.floor((2.0 * a / us + b) * u + lam + 0.43))
            if us >= 0.07 and v <= vr:
                return k
            if k < 0 or (us < 0.013 and v > us):
                continue
            if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)
                    <= k * loglam - lam - math.lgamma(k + 1)):
                return k


def numpy_rng(*parts: int) -> np.random.Generator:
    """numpy Generator keyed by the same derivation; for bulk statistics."""
    return np.random.Generator(np.random.Philox(key=derive_key(*parts)))

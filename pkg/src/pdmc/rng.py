"""Counter-based random number generation.

Every random quantity in the package is a pure function of (seed, stream
tags, counter), so any part of a sampling pass can be regenerated or
vectorized without storing intermediate draws. The generator is SplitMix64:
output k of a stream with root r is mix64(r + (k+1)*GOLDEN). Gaussians use
Box-Muller on 53-bit uniforms (two counters per draw), Poisson uses CDF
inversion below mean 10 and a normal approximation above.
"""

from __future__ import annotations

import math

import numpy as np

U64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
TWO_NEG53 = 2.0 ** -53

# Named stream tags. New streams get new tags; reusing a tag with different
# path components is fine, reusing a (tag, path) pair is not.
STREAM_SYNAPSES = 1
STREAM_UINIT = 2
STREAM_THALAMIC = 3
STREAM_SAMPLE = 4
STREAM_TEST = 99

# Poisson inversion stops after this many terms; the CDF has numerically
# saturated long before for the means this path accepts (< 10).
POISSON_MAX_K = 150
POISSON_NORMAL_CUTOVER = 10.0


def mix64(z: int) -> int:
    z &= U64
    z = ((z ^ (z >> 30)) * _M1) & U64
    z = ((z ^ (z >> 27)) * _M2) & U64
    return z ^ (z >> 31)


def stream_root(seed: int, *path: int) -> int:
    """Derive the 64-bit root of a named stream from a seed and tag path."""
    r = mix64((seed & U64) ^ GOLDEN)
    for comp in path:
        r = mix64(r ^ mix64((comp + GOLDEN) & U64))
    return r


def raw(root: int, counter: int) -> int:
    """The counter-th 64-bit output of the stream with the given root."""
    return mix64((root + ((counter + 1) * GOLDEN)) & U64)


def uniform53(x: int) -> float:
    """Map a 64-bit word to [0, 1) with 53-bit resolution."""
    return (x >> 11) * TWO_NEG53


def uniform53_pos(x: int) -> float:
    """Map a 64-bit word to (0, 1]; safe as a log() argument."""
    return ((x >> 11) + 1) * TWO_NEG53


def gauss(root: int, counter: int, mean: float = 0.0, sd: float = 1.0) -> float:
    """One N(mean, sd) draw consuming counters (counter, counter+1)."""
    u1 = uniform53_pos(raw(root, counter))
    u2 = uniform53(raw(root, counter + 1))
    z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
    return mean + sd * z


def poisson(root: int, counter: int, lam: float) -> int:
    """One Poisson(lam) draw consuming counters (counter, counter+1).

    The second counter is only consumed on the normal-approximation path, but
    is always reserved so counter layouts are independent of lam.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    u = uniform53(raw(root, counter))
    if lam < POISSON_NORMAL_CUTOVER:
        p = math.exp(-lam)
        cdf = p
        k = 0
        while u > cdf and k < POISSON_MAX_K:
            k += 1
            p *= lam / k
            cdf += p
        return k
    z = math.sqrt(-2.0 * math.log(uniform53_pos(raw(root, counter))))
    z *= math.cos(2.0 * math.pi * uniform53(raw(root, counter + 1)))
    return max(0, int(math.floor(lam + math.sqrt(lam) * z + 0.5)))


# ---------------------------------------------------------------------------
# Vectorized counterparts (used by network generation and the pure backend).
# ---------------------------------------------------------------------------

def raw_array(root: int, counters: np.ndarray) -> np.ndarray:
    """Vectorized raw(); counters is a uint64 array."""
    z = (np.uint64(root) + (counters + np.uint64(1)) * np.uint64(GOLDEN))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def uniform53_array(x: np.ndarray) -> np.ndarray:
    return (x >> np.uint64(11)).astype(np.float64) * TWO_NEG53


def uniform53_pos_array(x: np.ndarray) -> np.ndarray:
    return ((x >> np.uint64(11)).astype(np.float64) + 1.0) * TWO_NEG53


def bounded_array(root: int, counters: np.ndarray, n: int) -> np.ndarray:
    """Uniform integers in [0, n) as int64 (floor of u53 * n)."""
    u = uniform53_array(raw_array(root, counters))
    return np.floor(u * n).astype(np.int64)


def gauss_array(root: int, counters: np.ndarray, mean: float = 0.0,
                sd: float = 1.0) -> np.ndarray:
    """Vectorized gauss(); consumes (counters, counters+1)."""
    u1 = uniform53_pos_array(raw_array(root, counters))
    u2 = uniform53_array(raw_array(root, counters + np.uint64(1)))
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return mean + sd * z


class Stream:
    """Sequential cursor over one counter stream, for one-off sampling."""

    def __init__(self, seed: int, *path: int):
        self.root = stream_root(seed, *path)
        self.cursor = 0

    def next_raw(self) -> int:
        x = raw(self.root, self.cursor)
        self.cursor += 1
        return x

    def next_uniform(self) -> float:
        return uniform53(self.next_raw())

    def next_below(self, n: int) -> int:
        return int(self.next_uniform() * n)

    def sample_without_replacement(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n), by partial Fisher-Yates."""
        if k > n:
            raise ValueError("k must be <= n")
        pool = np.arange(n, dtype=np.int64)
        for i in range(k):
            j = i + self.next_below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return np.sort(pool[:k])

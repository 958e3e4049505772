"""Counter-based splittable random streams and distribution samplers.

A stream is three 64-bit words ``[key0, key1, counter]``.  Output number
``n`` is a keyed hash of the counter, so a stream can be copied or derived
in O(1) and two streams with equal keys and counters produce identical
numbers.  Substreams hash the parent keys together with an index; the
result depends only on the seed and the derivation path.

The jitted functions operate on raw ``uint64`` arrays and are what the
simulation kernels call.  :class:`RngStream` wraps them for Python callers.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_K0 = np.uint64(0x243F6A8885A308D3)
_K1 = np.uint64(0x13198A2E03707344)
_D0 = np.uint64(0xA4093822299F31D0)
_D1 = np.uint64(0x082EFA98EC4E6C89)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO_M53 = 1.0 / 9007199254740992.0

# Poisson means at or above this use transformed rejection; below, inversion.
POISSON_INVERSION_CUTOFF = 10.0


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def root_state(seed):
    st = np.empty(3, dtype=np.uint64)
    s = np.uint64(seed)
    st[0] = mix64(s ^ _K0)
    st[1] = mix64(mix64(s + _K1) ^ _K0)
    st[2] = np.uint64(0)
    return st


@njit(cache=True)
def derive_into(parent, index, child):
    i = np.uint64(index)
    h = mix64(i * GOLDEN + parent[1] + _D0)
    child[0] = mix64(parent[0] ^ h)
    child[1] = mix64(parent[1] ^ mix64(h + _D1))
    child[2] = np.uint64(0)


@njit(cache=True)
def derive(parent, index):
    child = np.empty(3, dtype=np.uint64)
    derive_into(parent, index, child)
    return child


@njit(cache=True)
def next_u64(st):
    c = st[2]
    st[2] = c + _ONE
    z = mix64(c * GOLDEN + st[1])
    return mix64(z ^ st[0])


@njit(cache=True)
def uniform(st):
    """Uniform on [0, 1) with 53 random bits."""
    return np.float64(next_u64(st) >> _S11) * _TWO_M53


@njit(cache=True)
def uniform_open(st):
    """Uniform on (0, 1); never returns either endpoint."""
    return (np.float64(next_u64(st) >> _S11) + 0.5) * _TWO_M53


@njit(cache=True)
def exponential(st, rate):
    # 1 - u with u in (0, 1) keeps the log finite and the draw positive
    return -math.log(1.0 - uniform_open(st)) / rate


@njit(cache=True)
def bernoulli(st, p):
    return 1 if uniform(st) < p else 0


@njit(cache=True)
def _poisson_inversion(st, mean):
    u = uniform(st)
    p = math.exp(-mean)
    cdf = p
    k = 0
    while u > cdf:
        k += 1
        p *= mean / k
        cdf += p
        if k > 1000:  # cdf saturated below u by rounding
            break
    return k


@njit(cache=True)
def _poisson_ptrs(st, mean):
    # Hormann (1993) transformed rejection with squeeze
    slam = math.sqrt(mean)
    loglam = math.log(mean)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        U = uniform(st) - 0.5
        V = uniform_open(st)
        us = 0.5 - abs(U)
        k = math.floor((2.0 * a / us + b) * U + mean + 0.43)
        if us >= 0.07 and V <= vr:
            return np.int64(k)
        if k < 0 or (us < 0.013 and V > us):
            continue
        if (math.log(V) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= -mean + k * loglam - math.lgamma(k + 1.0)):
            return np.int64(k)


@njit(cache=True)
def poisson(st, mean):
    if mean <= 0.0:
        return np.int64(0)
    if mean < POISSON_INVERSION_CUTOFF:
        return np.int64(_poisson_inversion(st, mean))
    return _poisson_ptrs(st, mean)


@njit(cache=True)
def poisson_from_uniform(u, mean):
    """Poisson quantile: smallest k with CDF(k) >= u.

    Monotone in both ``u`` and ``mean``, so feeding the same uniform to two
    means yields the tightest possible coupling and equal means give equal
    draws.  Large means start the search at the mode and sum the lower tail
    downward, which avoids underflow of exp(-mean).
    """
    if mean <= 0.0:
        return np.int64(0)
    if mean < POISSON_INVERSION_CUTOFF:
        p = math.exp(-mean)
        cdf = p
        k = 0
        while u > cdf and k < 1000:
            k += 1
            p *= mean / k
            cdf += p
        return np.int64(k)
    m = math.floor(mean)
    logmean = math.log(mean)
    pm = math.exp(m * logmean - mean - math.lgamma(m + 1.0))
    # cdf at the mode, accumulated from the mode downward
    cdf = pm
    p = pm
    j = m
    while j > 0:
        p *= j / mean
        j -= 1
        cdf += p
        if p < 1e-18 * cdf:
            break
    k = m
    if u <= cdf:
        p = pm
        while k > 0:
            # F(k-1) = F(k) - pmf(k)
            lower = cdf - p
            if lower < u:
                break
            cdf = lower
            p *= k / mean
            k -= 1
        return np.int64(k)
    p = pm
    limit = mean + 40.0 * math.sqrt(mean) + 40.0
    while cdf < u and k < limit:
        k += 1
        p *= mean / k
        cdf += p
    return np.int64(k)


@njit(cache=True)
def fill_uniform(st, out):
    for i in range(out.shape[0]):
        out[i] = uniform(st)


@njit(cache=True)
def fill_poisson(st, mean, out):
    for i in range(out.shape[0]):
        out[i] = poisson(st, mean)


@njit(cache=True)
def fill_exponential(st, rate, out):
    for i in range(out.shape[0]):
        out[i] = exponential(st, rate)


@njit(cache=True)
def fill_bernoulli(st, p, out):
    for i in range(out.shape[0]):
        out[i] = bernoulli(st, p)


class RngStream:
    """A deterministic random stream identified by ``(seed, path)``.

    Drawing advances the stream in place.  ``derive`` never touches the
    parent's counter, so substreams can be created at any time.
    """

    __slots__ = ("seed", "path", "state")

    def __init__(self, seed: int = 0, path: tuple[int, ...] = (), state: np.ndarray | None = None):
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        self.seed = int(seed)
        self.path = tuple(int(i) for i in path)
        if state is None:
            state = root_state(np.uint64(self.seed))
            for i in self.path:
                state = derive(state, np.uint64(i))
        self.state = state

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path}, counter={int(self.state[2])})"

    def derive(self, index: int) -> "RngStream":
        if index < 0:
            raise ValueError("substream index must be non-negative")
        return RngStream(self.seed, self.path + (index,), derive(self.state, np.uint64(index)))

    def copy(self) -> "RngStream":
        return RngStream(self.seed, self.path, self.state.copy())

    @property
    def counter(self) -> int:
        return int(self.state[2])

    def uniform(self, size: int | None = None):
        if size is None:
            return uniform(self.state)
        out = np.empty(size)
        fill_uniform(self.state, out)
        return out

    def poisson(self, mean: float, size: int | None = None):
        mean = float(mean)
        if not math.isfinite(mean) or mean < 0:
            raise ValueError(f"Poisson mean must be finite and non-negative, got {mean}")
        if size is None:
            return int(poisson(self.state, mean))
        out = np.empty(size, dtype=np.int64)
        fill_poisson(self.state, mean, out)
        return out

    def exponential(self, rate: float, size: int | None = None):
        rate = float(rate)
        if not rate > 0 or not math.isfinite(rate):
            raise ValueError(f"exponential rate must be positive, got {rate}")
        if size is None:
            return exponential(self.state, rate)
        out = np.empty(size)
        fill_exponential(self.state, rate, out)
        return out

    def bernoulli(self, p: float, size: int | None = None):
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"Bernoulli probability must lie in [0, 1], got {p}")
        if size is None:
            return int(bernoulli(self.state, p))
        out = np.empty(size, dtype=np.int64)
        fill_bernoulli(self.state, p, out)
        return out


def derive_substream(parent: RngStream, index: int) -> RngStream:
    return parent.derive(index)


def next_uniform(s: RngStream) -> float:
    return s.uniform()


def sample_poisson(s: RngStream, mean: float) -> int:
    return s.poisson(mean)


def sample_exponential(s: RngStream, rate: float) -> float:
    return s.exponential(rate)


def sample_bernoulli(s: RngStream, p: float) -> int:
    return s.bernoulli(p)

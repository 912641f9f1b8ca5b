"""Deterministic counter-based random streams.

All randomness in a run flows from one 64-bit master seed. Each consumer
(arrivals of dispatcher m in round t, services of server n in round t,
policy draws, communication sampling, ...) gets its own substream keyed by
``(seed, tag, entity, round)``, so adding or removing one consumer never
perturbs the draws seen by another.

The generator is splitmix64: output ``i`` of a stream with base state ``b``
is ``mix64(b + (i + 1) * GAMMA)``, a pure function of ``(b, i)``. That makes
the same sequences reproducible both scalar-style (the compiled engine) and
vectorized (the numpy engine and the statistical tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Substream tags. Keep in sync with the engine kernels.
TAG_ARRIVALS = 1
TAG_SERVICES = 2
TAG_POLICY = 3
TAG_COMM = 4
TAG_IDLE_NOTIFY = 5
TAG_INTERLEAVE = 6

# Poisson sampling switches from CDF inversion to transformed rejection here.
POISSON_INVERSION_CUTOFF = 30.0


def mix64(z: int) -> int:
    """Finalizing mix of splitmix64 (64-bit wrapping arithmetic)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def substream_base(seed: int, tag: int, entity: int = 0, round_no: int = 0) -> int:
    """Base state of the substream keyed by (seed, tag, entity, round)."""
    s = mix64(seed & MASK64)
    s = mix64(s ^ ((tag * GAMMA) & MASK64))
    s = mix64(s ^ ((entity * GAMMA) & MASK64))
    s = mix64(s ^ ((round_no * GAMMA) & MASK64))
    return s


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized mix64 over a uint64 array."""
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def uniforms_at(base: int, start: int, count: int) -> np.ndarray:
    """Outputs ``start .. start+count-1`` of the stream, as floats in [0, 1)."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        states = np.uint64(base) + idx * np.uint64(GAMMA)
    bits = mix64_array(states)
    return (bits >> np.uint64(11)).astype(np.float64) * (2.0**-53)


class Stream:
    """Sequential view of one substream. Cheap to create, owns no state
    beyond (base, counter)."""

    __slots__ = ("base", "counter")

    def __init__(self, base: int, counter: int = 0):
        self.base = base & MASK64
        self.counter = counter

    @classmethod
    def for_key(cls, seed: int, tag: int, entity: int = 0, round_no: int = 0) -> "Stream":
        return cls(substream_base(seed, tag, entity, round_no))

    def u64(self) -> int:
        self.counter += 1
        return mix64((self.base + self.counter * GAMMA) & MASK64)

    def uniform(self) -> float:
        return (self.u64() >> 11) * (2.0**-53)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n). Modulo bias is < n / 2**64."""
        if n <= 0:
            raise ValueError("randint requires n >= 1")
        return self.u64() % n

    def poisson(self, lam: float, exp_neg_lam: float | None = None) -> int:
        if lam < 0:
            raise ValueError("Poisson rate must be non-negative")
        if lam == 0.0:
            return 0
        if lam < POISSON_INVERSION_CUTOFF:
            if exp_neg_lam is None:
                exp_neg_lam = math.exp(-lam)
            return _poisson_inversion(self.uniform(), lam, exp_neg_lam)
        return _poisson_ptrs(self, lam)

    def geometric(self, mu: float) -> int:
        """Failures before first success: P(k) = (1 - mu) * mu**k, k >= 0.

        Implemented by counting Bernoulli trials so that both engine
        backends reproduce it with exact float comparisons only.
        """
        if not 0.0 < mu < 1.0:
            raise ValueError("geometric parameter must lie in (0, 1)")
        k = 0
        while self.uniform() < mu:
            k += 1
        return k

    def sample_distinct(self, n: int, k: int) -> np.ndarray:
        """k distinct integers from [0, n), by partial Fisher-Yates.

        Consumes exactly k draws. Returns them in selection order.
        """
        if k > n:
            raise ValueError("cannot sample more values than the population")
        perm = np.arange(n, dtype=np.int64)
        for i in range(k):
            j = i + self.randint(n - i)
            perm[i], perm[j] = perm[j], perm[i]
        return perm[:k].copy()

    def categorical(self, probs: np.ndarray) -> int:
        """One draw from a probability vector, by cumulative scan.

        If rounding left the total a hair under the drawn uniform, the last
        positive entry is returned.
        """
        u = self.uniform()
        acc = 0.0
        last_pos = -1
        for i in range(len(probs)):
            p = probs[i]
            if p > 0.0:
                last_pos = i
                acc += p
                if u < acc:
                    return i
        if last_pos < 0:
            raise ValueError("categorical draw from an all-zero vector")
        return last_pos

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]


def _poisson_inversion(u: float, lam: float, exp_neg_lam: float) -> int:
    p = exp_neg_lam
    cdf = p
    k = 0
    # u < 1 guarantees termination; the cap only guards degenerate rounding.
    while u >= cdf and k < 20000:
        k += 1
        p *= lam / k
        cdf += p
    return k


def _poisson_ptrs(stream: Stream, lam: float) -> int:
    """Transformed rejection with squeeze, for large rates."""
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = stream.uniform() - 0.5
        v = stream.uniform()
        us = 0.5 - abs(u)
        k = int(math.floor((2.0 * a / us + b) * u + lam + 0.43))
        if us >= 0.07 and v <= v_r:
            return k
        if k < 0 or (us < 0.013 and v > us):
            continue
        if math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b) <= (
            k * loglam - lam - math.lgamma(k + 1.0)
        ):
            return k


def poisson_array(seed: int, tag: int, count: int, lam: float, round_no: int = 0) -> np.ndarray:
    """``count`` Poisson draws, one per entity substream (vectorized).

    Entity ``i`` consumes from ``(seed, tag, i, round_no)`` exactly as the
    scalar path would, so scalar and vector draws agree bitwise for
    ``lam < POISSON_INVERSION_CUTOFF``.
    """
    if lam == 0.0:
        return np.zeros(count, dtype=np.int64)
    bases = _entity_bases(seed, tag, count, round_no)
    if lam < POISSON_INVERSION_CUTOFF:
        u = _first_uniforms(bases)
        exp_neg_lam = math.exp(-lam)
        k = np.zeros(count, dtype=np.int64)
        p = np.full(count, exp_neg_lam)
        cdf = p.copy()
        active = u >= cdf
        while active.any():
            k[active] += 1
            p[active] *= lam / k[active]
            cdf[active] += p[active]
            active &= u >= cdf
        return k
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        out[i] = Stream(int(bases[i])).poisson(lam)
    return out


def geometric_array(seed: int, tag: int, count: int, mu: float, round_no: int = 0) -> np.ndarray:
    """``count`` geometric draws, one per entity substream (vectorized)."""
    if not 0.0 < mu < 1.0:
        raise ValueError("geometric parameter must lie in (0, 1)")
    bases = _entity_bases(seed, tag, count, round_no)
    k = np.zeros(count, dtype=np.int64)
    active = np.ones(count, dtype=bool)
    trial = 0
    while active.any():
        with np.errstate(over="ignore"):
            states = bases + np.uint64((trial + 1) * GAMMA & MASK64)
        u = (mix64_array(states) >> np.uint64(11)).astype(np.float64) * (2.0**-53)
        cont = active & (u < mu)
        k[cont] += 1
        active = cont
        trial += 1
    return k


def _entity_bases(seed: int, tag: int, count: int, round_no: int) -> np.ndarray:
    s = mix64(seed & MASK64)
    s = mix64(s ^ ((tag * GAMMA) & MASK64))
    ent = np.arange(count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(s) ^ (ent * np.uint64(GAMMA))
    z = mix64_array(z)
    with np.errstate(over="ignore"):
        z = z ^ np.uint64((round_no * GAMMA) & MASK64)
    return mix64_array(z)


def _first_uniforms(bases: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        states = bases + np.uint64(GAMMA)
    return (mix64_array(states) >> np.uint64(11)).astype(np.float64) * (2.0**-53)


@dataclass(frozen=True)
class ArrivalBatch:
    """Per-dispatcher exogenous arrivals of one round."""

    per_dispatcher: np.ndarray
    total: int


def sample_arrivals(rng: Stream, config) -> ArrivalBatch:
    """Draw the round's arrivals: one Poisson per dispatcher."""
    lam = config.arrival_rate
    exp_neg_lam = math.exp(-lam) if 0.0 < lam < POISSON_INVERSION_CUTOFF else None
    counts = np.empty(config.m_dispatchers, dtype=np.int64)
    for m in range(config.m_dispatchers):
        counts[m] = rng.poisson(lam, exp_neg_lam)
    return ArrivalBatch(per_dispatcher=counts, total=int(counts.sum()))


def sample_services(rng: Stream, config) -> np.ndarray:
    """Draw the round's service capacities: one geometric per server."""
    mu = config.service_param
    if not 0.0 < mu < 1.0:
        raise ValueError("service_param must lie in (0, 1)")
    out = np.empty(config.n_servers, dtype=np.int64)
    for n in range(config.n_servers):
        out[n] = rng.geometric(mu)
    return out

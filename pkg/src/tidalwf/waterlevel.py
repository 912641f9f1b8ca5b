"""Exact water-level computation over integer queue vectors.

Pouring ``a`` discrete jobs into the histogram of queue lengths yields a
common level WL with Sum_n max(0, WL - Q_n) == a. The level is a rational
number whose denominator never exceeds the number of servers, so everything
here is exact: the level, the per-server fills g*, and the conservation
identity. Floating point only appears downstream, in the policy layer.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class TargetAllocation:
    """Water-filling target for a queue vector and a total arrival count.

    ``g_star[n]`` is the fill Q*_n - Q_n, ``q_star[n] = max(Q_n, WL)``, and
    ``support_count`` is the number of servers with a strictly positive fill.
    """

    water_level: Fraction
    g_star: tuple[Fraction, ...]
    q_star: tuple[Fraction, ...]
    support_count: int

    @property
    def total_fill(self) -> Fraction:
        return sum(self.g_star, Fraction(0))


def water_level(queues, a: int) -> Fraction:
    """Exact water level for integer queues and a non-negative job count.

    For ``a == 0`` this is min(Q) and nothing is poured.
    """
    q, a = _validate(queues, a)
    n = q.shape[0]
    qs = np.sort(q)
    prefix = 0
    j = 1
    while j < n and a + prefix + int(qs[j - 1]) > j * int(qs[j]):
        prefix += int(qs[j - 1])
        j += 1
    return Fraction(a + prefix + int(qs[j - 1]), j)


def target_allocation(queues, a: int) -> TargetAllocation:
    """Fills, targets, and support count consistent with :func:`water_level`."""
    q, a = _validate(queues, a)
    wl = water_level(q, a)
    g = tuple(max(Fraction(0), wl - int(x)) for x in q)
    q_star = tuple(max(Fraction(int(x)), wl) for x in q)
    support = sum(1 for x in g if x > 0)
    return TargetAllocation(water_level=wl, g_star=g, q_star=q_star, support_count=support)


def _validate(queues, a: int) -> tuple[np.ndarray, int]:
    q = np.asarray(queues, dtype=np.int64)
    if q.ndim != 1 or q.shape[0] == 0:
        raise ValueError("queue vector must be a non-empty 1-D array")
    if (q < 0).any():
        raise ValueError("queue lengths must be non-negative")
    if a < 0:
        raise ValueError("arrival count must be non-negative")
    return q, int(a)

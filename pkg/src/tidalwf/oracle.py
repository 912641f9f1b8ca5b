"""Independent checks for the probability policies.

Three routes that never share code with the policy layer: closed-form L2
objectives evaluated at arbitrary probability vectors, exhaustive grid
search over the probability simplex, and exact enumeration of every job
placement outcome for tiny systems. A subset-sum brute force covers the
two-server batch-assignment question.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .waterlevel import target_allocation

MAX_GRID_DIM = 5
MAX_GRID_RESOLUTION = 50
MAX_OUTCOMES = 10**6
MAX_PARTITION_SIZE = 24


@dataclass(frozen=True)
class ObjectiveContext:
    """Fixed data of one instance: the fills g* and the arrival quantities.

    ``mode`` is "split" (total arrivals a) or "unsplit" (per-dispatcher
    batch a_m, M dispatchers).
    """

    g_star: np.ndarray
    mode: str
    a: int = 0
    a_m: int = 0
    m_dispatchers: int = 0


def split_context(queues, a: int) -> ObjectiveContext:
    ta = target_allocation(queues, a)
    g = np.array([float(x) for x in ta.g_star])
    return ObjectiveContext(g_star=g, mode="split", a=int(a))


def unsplit_context(queues, a_m: int, m_dispatchers: int) -> ObjectiveContext:
    ta = target_allocation(queues, m_dispatchers * a_m)
    g = np.array([float(x) for x in ta.g_star])
    return ObjectiveContext(g_star=g, mode="unsplit", a_m=int(a_m), m_dispatchers=int(m_dispatchers))


def _check_p(ctx: ObjectiveContext, p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != ctx.g_star.shape:
        raise ValueError("probability vector has the wrong length")
    if (p < -1e-12).any() or abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValueError("not a probability vector")
    return p


def objective_split(ctx: ObjectiveContext, p) -> float:
    """Expected squared L2 distance from the water-filling target when each
    of the a jobs is routed independently with probabilities p (so each
    server's intake is binomial)."""
    p = _check_p(ctx, p)
    a = ctx.a
    g = ctx.g_star
    sum_p2 = float(np.dot(p, p))
    return float(np.dot(g, g) - 2.0 * a * np.dot(g, p) + a - a * sum_p2 + a * a * sum_p2)


def objective_unsplit(ctx: ObjectiveContext, p) -> float:
    """Same distance when each of the M dispatchers routes its whole batch
    of a_m jobs with one draw from p."""
    p = _check_p(ctx, p)
    a_m, m = ctx.a_m, ctx.m_dispatchers
    g = ctx.g_star
    sum_p2 = float(np.dot(p, p))
    return float(
        np.dot(g, g)
        - 2.0 * m * a_m * np.dot(g, p)
        + m * a_m * a_m
        + m * (m - 1) * a_m * a_m * sum_p2
    )


def objective(ctx: ObjectiveContext, p) -> float:
    return objective_split(ctx, p) if ctx.mode == "split" else objective_unsplit(ctx, p)


def _compositions(total: int, parts: int) -> np.ndarray:
    """All vectors of ``parts`` non-negative integers summing to ``total``."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    rows = []
    for head in range(total + 1):
        tail = _compositions(total - head, parts - 1)
        block = np.empty((tail.shape[0], parts), dtype=np.int64)
        block[:, 0] = head
        block[:, 1:] = tail
        rows.append(block)
    return np.concatenate(rows, axis=0)


def simplex_search(ctx: ObjectiveContext, resolution: int = 50) -> tuple[np.ndarray, float]:
    """Exhaustive minimization of the objective over the lattice
    {k / resolution} on the probability simplex. Returns (P_best, f_best)."""
    n = ctx.g_star.shape[0]
    if n > MAX_GRID_DIM:
        raise ValueError(f"grid search limited to {MAX_GRID_DIM} servers")
    if resolution > MAX_GRID_RESOLUTION or resolution < 1:
        raise ValueError(f"resolution must lie in [1, {MAX_GRID_RESOLUTION}]")
    grid = _compositions(resolution, n).astype(np.float64) / resolution
    g = ctx.g_star
    sum_p2 = np.einsum("ij,ij->i", grid, grid)
    gp = grid @ g
    if ctx.mode == "split":
        a = ctx.a
        f = float(np.dot(g, g)) - 2.0 * a * gp + a - a * sum_p2 + a * a * sum_p2
    else:
        a_m, m = ctx.a_m, ctx.m_dispatchers
        f = (
            float(np.dot(g, g))
            - 2.0 * m * a_m * gp
            + m * a_m * a_m
            + m * (m - 1) * a_m * a_m * sum_p2
        )
    best = int(np.argmin(f))
    return grid[best].copy(), float(f[best])


def outcome_distribution(arrivals, probs_per_dispatcher, splittable: bool) -> dict[tuple, Fraction]:
    """Exact distribution of the per-server intake vector.

    ``probs_per_dispatcher`` holds one probability vector per dispatcher;
    Fraction entries keep the result exact (floats are converted exactly).
    Zero-probability branches are pruned before the size guard, so
    degenerate vectors stay cheap however many dispatchers there are.
    """
    probs = [[Fraction(x) for x in p] for p in probs_per_dispatcher]
    if len(probs) != len(arrivals):
        raise ValueError("need one probability vector per dispatcher")
    n_servers = len(probs[0])
    per_dispatcher: list[list[tuple[tuple, Fraction]]] = []
    space = 1
    for a_m, p in zip(arrivals, probs):
        if len(p) != n_servers:
            raise ValueError("probability vectors must have equal lengths")
        if a_m == 0:
            continue
        options = _dispatcher_outcomes(int(a_m), p, splittable)
        per_dispatcher.append(options)
        space *= len(options)
        if space > MAX_OUTCOMES:
            raise ValueError(f"outcome space exceeds {MAX_OUTCOMES}")
    dist: dict[tuple, Fraction] = {tuple([0] * n_servers): Fraction(1)}
    for options in per_dispatcher:
        new: dict[tuple, Fraction] = {}
        for g_prev, w_prev in dist.items():
            for g_add, w_add in options:
                key = tuple(x + y for x, y in zip(g_prev, g_add))
                new[key] = new.get(key, Fraction(0)) + w_prev * w_add
        dist = new
    return dist


def _dispatcher_outcomes(a_m: int, p: list[Fraction], splittable: bool) -> list[tuple[tuple, Fraction]]:
    from math import factorial

    n = len(p)
    out: list[tuple[tuple, Fraction]] = []
    if not splittable:
        for srv in range(n):
            if p[srv] != 0:
                g = [0] * n
                g[srv] = a_m
                out.append((tuple(g), p[srv]))
        return out
    fact_a = factorial(a_m)

    def rec(idx: int, left: int, weight: Fraction, counts: list[int]):
        if idx == n - 1:
            if left > 0 and p[idx] == 0:
                return
            counts[idx] = left
            coeff = fact_a
            for c in counts:
                coeff //= factorial(c)
            out.append((tuple(counts), weight * p[idx] ** left * coeff))
            counts[idx] = 0
            return
        top = left if p[idx] != 0 else 0
        for c in range(top + 1):
            counts[idx] = c
            rec(idx + 1, left - c, weight * p[idx] ** c, counts)
        counts[idx] = 0

    rec(0, a_m, Fraction(1), [0] * n)
    return out


def enumerate_outcomes(queues, arrivals, probs_per_dispatcher, splittable: bool) -> Fraction:
    """Exact E || Q* - Q_bar ||^2 by summing over all placement outcomes."""
    total = int(sum(arrivals))
    ta = target_allocation(queues, total)
    q = [int(x) for x in np.asarray(queues)]
    dist = outcome_distribution(arrivals, probs_per_dispatcher, splittable)
    acc = Fraction(0)
    for g_vec, w in dist.items():
        d2 = sum((qs - (qn + gn)) ** 2 for qs, qn, gn in zip(ta.q_star, q, g_vec))
        acc += w * d2
    return acc


def partition_bruteforce(batch_sizes) -> tuple[bool, int, list[int]]:
    """Exhaustive two-way split of the batch vector.

    Returns (an equal split exists, minimum |sum difference|, the index set
    of one side of a best split). When an equal split exists the two-server
    assignment that follows it reaches the target exactly.
    """
    sizes = [int(x) for x in batch_sizes]
    m = len(sizes)
    if m == 0:
        raise ValueError("batch vector must be non-empty")
    if m > MAX_PARTITION_SIZE:
        raise ValueError(f"brute force limited to {MAX_PARTITION_SIZE} batches")
    weights = np.asarray(sizes, dtype=np.int64)
    total = int(weights.sum())
    best_gap = None
    best_mask = 0
    chunk = 1 << 18
    for start in range(0, 1 << m, chunk):
        idx = np.arange(start, min(start + chunk, 1 << m), dtype=np.int64)
        bits = (idx[:, None] >> np.arange(m, dtype=np.int64)) & 1
        sums = bits @ weights
        gaps = np.abs(2 * sums - total)
        k = int(np.argmin(gaps))
        if best_gap is None or gaps[k] < best_gap:
            best_gap = int(gaps[k])
            best_mask = int(idx[k])
    side = [i for i in range(m) if (best_mask >> i) & 1]
    return best_gap == 0, best_gap, side

"""Dispatching policies.

Probability policies (stwf / utwf / wfie) reduce to exact integer
arithmetic: with integer queues and an integer arrival estimate, the water
level over the j filled servers is A / j where A is an integer, and every
policy probability is a ratio of two integers well below 2**53. Each output
entry is therefore the correctly rounded double of the exact rational
value, which keeps golden-value tests exact and keeps the compiled engine
bit-compatible with this reference implementation.

Baseline policies (jsq, jsq(d), jiq, lsq) are mechanical: they pick servers
directly instead of producing a probability vector. Splittable variants
place one job at a time against a self-updated view.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .rng import Stream

# Identifier strings accepted in configs and on the CLI.
POLICY_IDS = (
    "random",
    "jsq",
    "jsq2",
    "jiq",
    "lsq2",
    "wfie",
    "stwf",
    "utwf",
    "l-stwf",
    "l-utwf",
    "stwf-ts",
    "utwf-ts",
)

# Integer codes shared with the engine kernels.
KIND_CODES = {"random": 0, "jsq": 1, "jsqd": 2, "jiq": 3, "lsq": 4, "wfie": 5, "stwf": 6, "utwf": 7}
INFO_CODES = {"complete": 0, "local": 1, "timestamped": 2}


@dataclass(frozen=True)
class PolicySpec:
    """A policy identifier resolved to its mechanics and information mode."""

    name: str
    kind: str
    d: int
    info: str

    @property
    def kind_code(self) -> int:
        return KIND_CODES[self.kind]

    @property
    def info_code(self) -> int:
        return INFO_CODES[self.info]

    @property
    def uses_probabilities(self) -> bool:
        return self.kind in ("wfie", "stwf", "utwf")


def parse_policy(name: str, param: int | None = None) -> PolicySpec:
    """Resolve a policy identifier; ``param`` overrides the sample size d."""
    table = {
        "random": ("random", 0, "complete"),
        "jsq": ("jsq", 0, "complete"),
        "jsq2": ("jsqd", 2, "complete"),
        "jiq": ("jiq", 0, "complete"),
        "lsq2": ("lsq", 2, "complete"),
        "wfie": ("wfie", 0, "complete"),
        "stwf": ("stwf", 0, "complete"),
        "utwf": ("utwf", 0, "complete"),
        "l-stwf": ("stwf", 0, "local"),
        "l-utwf": ("utwf", 0, "local"),
        "stwf-ts": ("stwf", 0, "timestamped"),
        "utwf-ts": ("utwf", 0, "timestamped"),
    }
    if name not in table:
        raise ValueError(f"unknown policy {name!r}; expected one of {', '.join(POLICY_IDS)}")
    kind, d, info = table[name]
    if param is not None:
        if kind not in ("jsqd", "lsq"):
            raise ValueError(f"policy {name!r} takes no parameter")
        if param < 1:
            raise ValueError("policy parameter d must be >= 1")
        d = int(param)
    return PolicySpec(name=name, kind=kind, d=d, info=info)


def _support_stats(view: np.ndarray, a: int) -> tuple[int, int]:
    """Support size j and integer A with water level == A / j (a > 0)."""
    qs = np.sort(view)
    n = qs.shape[0]
    prefix = 0
    j = 1
    while j < n and a + prefix + int(qs[j - 1]) > j * int(qs[j]):
        prefix += int(qs[j - 1])
        j += 1
    return j, a + prefix + int(qs[j - 1])


def _uniform_argmin(view: np.ndarray) -> np.ndarray:
    p = np.zeros(view.shape[0], dtype=np.float64)
    mins = np.flatnonzero(view == view.min())
    p[mins] = 1.0 / mins.shape[0]
    return p


def _check_view(view) -> np.ndarray:
    v = np.asarray(view, dtype=np.int64)
    if v.ndim != 1 or v.shape[0] == 0:
        raise ValueError("queue view must be a non-empty 1-D integer array")
    return v


def stwf_probs(view, a_est: int) -> np.ndarray:
    """Splittable tidal water-filling probabilities.

    ``a_est`` is the dispatcher's estimate of the total arrivals this round
    (M times its own batch). For a single total arrival the optimum
    degenerates to a uniform choice among the shortest queues.
    """
    v = _check_view(view)
    if a_est <= 0:
        raise ValueError("arrival estimate must be positive")
    if a_est == 1:
        return _uniform_argmin(v)
    j, big_a = _support_stats(v, a_est)
    den = j * (a_est - 1)
    p = np.zeros(v.shape[0], dtype=np.float64)
    for n in range(v.shape[0]):
        num = big_a - j * int(v[n]) - 1
        if num > 0:
            p[n] = num / den
    return p


def utwf_probs(view, a_m: int, m_dispatchers: int) -> np.ndarray:
    """Unsplittable tidal water-filling probabilities for one dispatcher.

    Positive mass goes exactly to the servers that would sit strictly below
    the water level if the other dispatchers' (M-1) * a_m jobs were poured
    alone; with a single dispatcher this degenerates to shortest-queue.
    """
    v = _check_view(view)
    if a_m <= 0:
        raise ValueError("batch size must be positive")
    if m_dispatchers <= 0:
        raise ValueError("dispatcher count must be positive")
    if m_dispatchers == 1:
        return _uniform_argmin(v)
    j_others, a_others = _support_stats(v, (m_dispatchers - 1) * a_m)
    j, big_a = _support_stats(v, m_dispatchers * a_m)
    n_servers = v.shape[0]
    in_u = np.empty(n_servers, dtype=bool)
    for n in range(n_servers):
        in_u[n] = a_others - j_others * int(v[n]) > 0
    u_size = int(in_u.sum())
    spill = 0  # j * (fill outside U), an exact integer
    for n in range(n_servers):
        if not in_u[n]:
            spill += max(0, big_a - j * int(v[n]))
    den = j * u_size * (m_dispatchers - 1) * a_m
    p = np.zeros(n_servers, dtype=np.float64)
    for n in range(n_servers):
        if in_u[n]:
            num = u_size * (big_a - j * int(v[n])) - (j * a_m - spill)
            if num > 0:
                p[n] = num / den
    return p


def wfie_probs(view, a_est: int) -> np.ndarray:
    """Water filling in expectation: probability proportional to the fill."""
    v = _check_view(view)
    if a_est <= 0:
        raise ValueError("arrival estimate must be positive")
    j, big_a = _support_stats(v, a_est)
    den = j * a_est
    p = np.zeros(v.shape[0], dtype=np.float64)
    for n in range(v.shape[0]):
        num = big_a - j * int(v[n])
        if num > 0:
            p[n] = num / den
    return p


def check_probability_vector(p: np.ndarray) -> None:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] == 0:
        raise ValueError("probability vector must be non-empty and 1-D")
    if (p < 0.0).any() or (p > 1.0).any():
        raise ValueError("probabilities must lie in [0, 1]")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValueError("probabilities must sum to 1 within 1e-9")


def sample_decision(p: np.ndarray, a_m: int, splittable: bool, rng: Stream) -> np.ndarray:
    """Turn a probability vector into per-server job counts.

    Splittable: one independent categorical draw per job. Unsplittable: a
    single draw routes the whole batch.
    """
    check_probability_vector(p)
    counts = np.zeros(len(p), dtype=np.int64)
    if a_m <= 0:
        return counts
    if splittable:
        for _ in range(a_m):
            counts[rng.categorical(p)] += 1
    else:
        counts[rng.categorical(p)] = a_m
    return counts


def argmin_tiebreak(values: np.ndarray, rng: Stream) -> int:
    """Index of a minimal entry, ties broken uniformly (always draws once)."""
    mins = np.flatnonzero(values == values.min())
    return int(mins[rng.randint(mins.shape[0])])


def jsq_dispatch(view, a_m: int, splittable: bool, rng: Stream) -> np.ndarray:
    """Join the shortest queue.

    Splittable placement is the dispatcher's private water filling: each job
    goes to the current minimum of (view + jobs it already placed).
    """
    v = _check_view(view)
    counts = np.zeros(v.shape[0], dtype=np.int64)
    if a_m <= 0:
        return counts
    if splittable:
        work = v.copy()
        for _ in range(a_m):
            n = argmin_tiebreak(work, rng)
            counts[n] += 1
            work[n] += 1
    else:
        counts[argmin_tiebreak(v, rng)] = a_m
    return counts


def jsqd_dispatch(view, a_m: int, d: int, splittable: bool, rng: Stream) -> np.ndarray:
    """Power of d choices: probe d distinct servers, pick the shortest."""
    v = _check_view(view)
    if not 1 <= d <= v.shape[0]:
        raise ValueError("probe count d must lie in [1, N]")
    counts = np.zeros(v.shape[0], dtype=np.int64)
    if a_m <= 0:
        return counts
    if splittable:
        work = v.copy()
        for _ in range(a_m):
            probes = rng.sample_distinct(v.shape[0], d)
            n = int(probes[argmin_tiebreak(work[probes], rng)])
            counts[n] += 1
            work[n] += 1
    else:
        probes = rng.sample_distinct(v.shape[0], d)
        n = int(probes[argmin_tiebreak(v[probes], rng)])
        counts[n] = a_m
    return counts


def jiq_dispatch(idle_list: deque, n_servers: int, a_m: int, splittable: bool, rng: Stream) -> np.ndarray:
    """Join the idle queue: consume known-idle servers FIFO, else random.

    Consumed servers are removed from the list; splittable mode spends one
    idle server per job.
    """
    counts = np.zeros(n_servers, dtype=np.int64)
    if a_m <= 0:
        return counts
    if splittable:
        for _ in range(a_m):
            n = idle_list.popleft() if idle_list else rng.randint(n_servers)
            counts[n] += 1
    else:
        n = idle_list.popleft() if idle_list else rng.randint(n_servers)
        counts[n] = a_m
    return counts


def lsq_dispatch(estimates: np.ndarray, a_m: int, splittable: bool, rng: Stream) -> np.ndarray:
    """Local shortest queue: argmin of the local estimates, with self-update.

    ``estimates`` is mutated: every placed job bumps the sender's estimate
    for the receiving server, so the view stays consistent between rounds.
    """
    if estimates.ndim != 1 or estimates.shape[0] == 0:
        raise ValueError("estimates must be a non-empty 1-D array")
    counts = np.zeros(estimates.shape[0], dtype=np.int64)
    if a_m <= 0:
        return counts
    if splittable:
        for _ in range(a_m):
            n = argmin_tiebreak(estimates, rng)
            counts[n] += 1
            estimates[n] += 1
    else:
        n = argmin_tiebreak(estimates, rng)
        counts[n] = a_m
        estimates[n] += a_m
    return counts


def random_dispatch(n_servers: int, a_m: int, splittable: bool, rng: Stream) -> np.ndarray:
    """Uniformly random server, per job (splittable) or per batch."""
    counts = np.zeros(n_servers, dtype=np.int64)
    if a_m <= 0:
        return counts
    if splittable:
        for _ in range(a_m):
            counts[rng.randint(n_servers)] += 1
    else:
        counts[rng.randint(n_servers)] = a_m
    return counts

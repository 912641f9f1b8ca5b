"""Simulation driver and metrics.

``run_simulation`` executes the four-phase round loop for a config and
returns an ``ExperimentResult`` with the response-time statistics. Two
backends implement the loop: a numba-compiled kernel (default) and a pure
numpy/Python one. They produce identical trajectories for the same seed;
set ``TIDALWF_NO_NUMBA=1`` to force the numpy path, e.g. where numba is
unavailable. Job-record collection and per-round validation always use the
numpy path.

Response-time convention: a job served in its arrival round scores 1
(completion_round - arrival_round + 1), so log-scale tail plots stay
well-defined.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import _engine_numpy
from .config import SystemConfig
from .infolayer import eta_sample_count
from ._engine_numpy import JobRecord  # re-export

PERCENTILES = (("p50", 0.50), ("p90", 0.90), ("p95", 0.95), ("p99", 0.99), ("p999", 0.999))

RESPONSE_TIME_CONVENTION = "completion_round - arrival_round + 1"


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _env_disabled() -> bool:
    return os.environ.get("TIDALWF_NO_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


def default_backend() -> str:
    if not _env_disabled() and numba_available():
        return "numba"
    return "numpy"


@dataclass
class MetricsAccumulator:
    """Raw measurement state of one run."""

    response_histogram: dict[int, int]
    queue_sum_series: np.ndarray
    jobs_completed: int
    links_established: int

    def total_measured(self) -> int:
        return sum(self.response_histogram.values())


@dataclass
class ExperimentResult:
    mean_response: float | None
    percentiles: dict[str, int | None]
    ccdf: list[tuple[int, float]]
    stability_avg: float
    stability_second_half: float
    config: dict
    seed: int
    metrics: MetricsAccumulator
    arrivals_total: int
    completions_total: int
    measured_arrivals: int
    final_queue_mass: int
    job_records: list | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "mean_response": self.mean_response,
            "p50": self.percentiles["p50"],
            "p90": self.percentiles["p90"],
            "p95": self.percentiles["p95"],
            "p99": self.percentiles["p99"],
            "p999": self.percentiles["p999"],
            "ccdf": [[int(tau), frac] for tau, frac in self.ccdf],
            "stability_avg": self.stability_avg,
            "stability_second_half": self.stability_second_half,
            "jobs_completed": self.metrics.jobs_completed,
            "jobs_measured": self.metrics.total_measured(),
            "links_established": self.metrics.links_established,
            "arrivals_total": self.arrivals_total,
            "final_queue_mass": self.final_queue_mass,
            "response_time_convention": RESPONSE_TIME_CONVENTION,
            "config": self.config,
            "seed": self.seed,
        }


def ccdf_points(hist: dict[int, int]) -> list[tuple[int, float]]:
    """Step-corner points of the response-time CCDF.

    For each observed response value r the output holds (r-1, frac > r-1)
    and (r, frac > r); fractions are of all measured jobs and the sequence
    is non-increasing.
    """
    if not hist:
        raise ValueError("empty histogram")
    total = sum(hist.values())
    points: list[tuple[int, float]] = []
    cum = 0
    last_tau = None
    for r in sorted(hist):
        if last_tau != r - 1:
            points.append((r - 1, (total - cum) / total))
        cum += hist[r]
        points.append((r, (total - cum) / total))
        last_tau = r
    return points


def percentile_from_hist(hist: dict[int, int], q: float) -> int | None:
    """Smallest response time r with P(response <= r) >= q."""
    if not hist:
        return None
    total = sum(hist.values())
    cum = 0
    for r in sorted(hist):
        cum += hist[r]
        if cum >= q * total:
            return r
    return max(hist)


def run_simulation(
    config: SystemConfig,
    backend: str | None = None,
    collect_jobs: bool = False,
    validate: bool = False,
) -> ExperimentResult:
    """Run one simulation and assemble its metrics.

    Queues start empty; response times are recorded only for jobs arriving
    at or after the warmup round. Identical config and seed give identical
    results.
    """
    raw, records = simulate_raw(config, backend=backend, collect_jobs=collect_jobs, validate=validate)
    (
        hist_arr,
        queue_sum,
        arrivals_total,
        completions_total,
        measured_arrivals,
        measured_completions,
        links,
        final_queues,
    ) = raw
    final_mass = int(final_queues.sum())
    if arrivals_total != completions_total + final_mass:
        raise RuntimeError("job conservation violated (engine defect)")

    hist = {int(r): int(c) for r, c in enumerate(hist_arr) if c > 0}
    if sum(hist.values()) != measured_completions:
        raise RuntimeError("histogram mass does not match measured completions")

    metrics = MetricsAccumulator(
        response_histogram=hist,
        queue_sum_series=queue_sum,
        jobs_completed=int(completions_total),
        links_established=int(links),
    )
    total = measured_completions
    mean = (
        float(sum(r * c for r, c in hist.items()) / total) if total > 0 else None
    )
    percentiles = {name: percentile_from_hist(hist, q) for name, q in PERCENTILES}
    half = queue_sum.shape[0] // 2
    return ExperimentResult(
        mean_response=mean,
        percentiles=percentiles,
        ccdf=ccdf_points(hist) if hist else [],
        stability_avg=float(queue_sum.mean()),
        stability_second_half=float(queue_sum[half:].mean()),
        config=config.to_dict(),
        seed=config.seed,
        metrics=metrics,
        arrivals_total=int(arrivals_total),
        completions_total=int(completions_total),
        measured_arrivals=int(measured_arrivals),
        final_queue_mass=final_mass,
        job_records=records,
    )


def simulate_raw(
    config: SystemConfig,
    backend: str | None = None,
    collect_jobs: bool = False,
    validate: bool = False,
):
    """Run the round loop and return the raw arrays (see the backends)."""
    if backend is None:
        backend = default_backend()
    if collect_jobs or validate:
        backend = "numpy"
    if backend == "numpy":
        out = _engine_numpy.simulate(config, collect_jobs=collect_jobs, validate=validate)
        return out[:-1], out[-1]
    if backend != "numba":
        raise ValueError(f"unknown backend {backend!r}")
    import math

    from ._engine_numba import simulate_kernel

    lam = config.arrival_rate
    out = simulate_kernel(
        np.uint64(config.seed),
        config.n_servers,
        config.m_dispatchers,
        config.rounds,
        config.warmup,
        lam,
        math.exp(-lam) if lam < 30.0 else 0.0,
        config.service_param,
        config.policy.kind_code,
        config.policy.d,
        config.policy.info_code,
        eta_sample_count(config.eta, config.n_servers),
        config.splittable,
    )
    return out, None


def warm_up_compiler() -> None:
    """Trigger (or load from cache) the kernel compilation with a tiny run."""
    if default_backend() != "numba":
        return
    from .config import make_config

    cfg = make_config(
        n_servers=2, m_dispatchers=2, mu=0.5, rounds=4, policy="stwf", rho=0.5, warmup=0, seed=7
    )
    simulate_raw(cfg, backend="numba")

"""Pure numpy/Python round loop.

This is the reference implementation of the simulation semantics; the
compiled engine in ``_engine_numba`` reproduces it trajectory-for-trajectory
(same substreams, same draw order). It is the fallback when numba is
unavailable or disabled, and the only backend that can collect per-job
records and run per-round invariant checks.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import infolayer, policies
from .config import SystemConfig
from .rng import (
    TAG_ARRIVALS,
    TAG_COMM,
    TAG_IDLE_NOTIFY,
    TAG_INTERLEAVE,
    TAG_POLICY,
    TAG_SERVICES,
    Stream,
    geometric_array,
    poisson_array,
)


@dataclass
class JobRecord:
    """One job's life: where it arrived, where it went, when it finished."""

    arrival_round: int
    dispatcher: int
    server: int
    completion_round: int = -1

    @property
    def response_time(self) -> int:
        if self.completion_round < 0:
            raise ValueError("job has not completed")
        return self.completion_round - self.arrival_round + 1


def simulate(
    config: SystemConfig,
    collect_jobs: bool = False,
    validate: bool = False,
):
    """Run the four-phase round loop; see the engine module for the contract.

    Returns (hist, queue_sum, arrivals_total, completions_total,
    measured_arrivals, measured_completions, links, final_queues, records);
    ``records`` is None unless ``collect_jobs``.
    """
    n, m = config.n_servers, config.m_dispatchers
    t_rounds, warmup = config.rounds, config.warmup
    lam, mu = config.arrival_rate, config.service_param
    seed = config.seed
    spec = config.policy
    splittable = config.splittable

    queues = np.zeros(n, dtype=np.int64)
    queue_sum = np.zeros(t_rounds, dtype=np.int64)
    hist: dict[int, int] = {}
    fifo = [deque() for _ in range(n)]  # per server: [round, count] groups
    pending_records = [deque() for _ in range(n)] if collect_jobs else None
    records: list[JobRecord] | None = [] if collect_jobs else None

    needs_views = spec.info != "complete"
    dviews = [infolayer.LocalView.empty(n) for _ in range(m)] if (needs_views or spec.kind == "lsq") else None
    sviews = [infolayer.LocalView.empty(n) for _ in range(n)] if spec.info == "timestamped" else None
    idle_lists = [deque() for _ in range(m)] if spec.kind == "jiq" else None
    idle_member = np.zeros((m, n), dtype=bool) if spec.kind == "jiq" else None
    prev_idle = np.ones(n, dtype=bool)

    arrivals_total = completions_total = 0
    measured_arrivals = measured_completions = 0
    links = 0

    for t in range(t_rounds):
        queue_sum[t] = int(queues.sum())

        # Phase 1: arrivals.
        arrivals = poisson_array(seed, TAG_ARRIVALS, m, lam, round_no=t)
        round_arrivals = int(arrivals.sum())
        arrivals_total += round_arrivals
        if t >= warmup:
            measured_arrivals += round_arrivals

        # Phase 2: dispatching.
        g = np.zeros(n, dtype=np.int64)
        round_links: list[list[int]] = [[] for _ in range(m)]
        senders: list[list[int]] = [[] for _ in range(n)] if collect_jobs else None
        for mi in range(m):
            a_m = int(arrivals[mi])
            if a_m == 0:
                continue
            stream = Stream.for_key(seed, TAG_POLICY, mi, t)
            counts = _decide(
                spec, queues, dviews, idle_lists, idle_member, mi, a_m, m, splittable, stream
            )
            g += counts
            targets = np.flatnonzero(counts)
            links += targets.shape[0]
            round_links[mi] = [int(x) for x in targets]
            if collect_jobs:
                for srv in targets:
                    senders[int(srv)].extend([mi] * int(counts[srv]))
        for srv in range(n):
            if g[srv] > 0:
                fifo[srv].append([t, int(g[srv])])
                if collect_jobs:
                    order = senders[srv]
                    Stream.for_key(seed, TAG_INTERLEAVE, srv, t).shuffle(order)
                    for mi in order:
                        rec = JobRecord(arrival_round=t, dispatcher=mi, server=srv)
                        pending_records[srv].append(rec)
                        records.append(rec)

        # Phase 3: departures (FIFO, at most s_n jobs per server).
        services = geometric_array(seed, TAG_SERVICES, n, mu, round_no=t)
        avail = queues + g
        done = np.minimum(avail, services)
        for srv in range(n):
            remaining = int(done[srv])
            while remaining > 0:
                group = fifo[srv][0]
                take = min(group[1], remaining)
                if group[0] >= warmup:
                    resp = t - group[0] + 1
                    hist[resp] = hist.get(resp, 0) + take
                    measured_completions += take
                if take == group[1]:
                    fifo[srv].popleft()
                else:
                    group[1] -= take
                remaining -= take
            if collect_jobs:
                for _ in range(int(done[srv])):
                    pending_records[srv].popleft().completion_round = t
        completions_total += int(done.sum())
        next_queues = avail - done

        if validate:
            _check_round(queues, g, services, done, next_queues, fifo)

        # Phase 4: communication.
        if spec.kind == "jiq":
            for srv in range(n):
                idle_now = next_queues[srv] == 0
                if idle_now and (not prev_idle[srv] or g[srv] > 0):
                    target = Stream.for_key(seed, TAG_IDLE_NOTIFY, srv, t).randint(m)
                    if not idle_member[target, srv]:
                        idle_lists[target].append(srv)
                        idle_member[target, srv] = True
                        links += 1
                prev_idle[srv] = idle_now
        elif spec.kind == "lsq":
            for mi in range(m):
                infolayer.refresh_fixed(
                    dviews[mi], next_queues, spec.d, Stream.for_key(seed, TAG_COMM, mi, t), t
                )
                links += min(spec.d, n)
        if spec.info == "local":
            links += infolayer.end_of_round_update(
                dviews,
                next_queues,
                round_links,
                config.eta,
                [Stream.for_key(seed, TAG_COMM, mi, t) for mi in range(m)],
                t,
            )
        elif spec.info == "timestamped":
            links += infolayer.timestamped_round_update(
                dviews,
                sviews,
                next_queues,
                round_links,
                config.eta,
                [Stream.for_key(seed, TAG_COMM, mi, t) for mi in range(m)],
                t,
            )

        queues = next_queues

    max_resp = max(hist) if hist else 0
    hist_arr = np.zeros(max_resp + 1, dtype=np.int64)
    for resp, count in hist.items():
        hist_arr[resp] = count
    return (
        hist_arr,
        queue_sum,
        arrivals_total,
        completions_total,
        measured_arrivals,
        measured_completions,
        links,
        queues,
        records,
    )


def _decide(spec, queues, dviews, idle_lists, idle_member, mi, a_m, m, splittable, stream):
    kind = spec.kind
    if kind in ("wfie", "stwf", "utwf"):
        view = queues if spec.info == "complete" else dviews[mi].estimates
        if kind == "wfie":
            p = policies.wfie_probs(view, m * a_m)
        elif kind == "stwf":
            p = policies.stwf_probs(view, m * a_m)
        else:
            p = policies.utwf_probs(view, a_m, m)
        return policies.sample_decision(p, a_m, splittable, stream)
    if kind == "random":
        return policies.random_dispatch(queues.shape[0], a_m, splittable, stream)
    if kind == "jsq":
        return policies.jsq_dispatch(queues, a_m, splittable, stream)
    if kind == "jsqd":
        return policies.jsqd_dispatch(queues, a_m, spec.d, splittable, stream)
    if kind == "jiq":
        counts = policies.jiq_dispatch(idle_lists[mi], queues.shape[0], a_m, splittable, stream)
        listed = set(idle_lists[mi])
        for srv in np.flatnonzero(idle_member[mi]):
            if int(srv) not in listed:
                idle_member[mi, srv] = False
        return counts
    if kind == "lsq":
        return policies.lsq_dispatch(dviews[mi].estimates, a_m, splittable, stream)
    raise AssertionError(f"unhandled policy kind {kind}")


def _check_round(queues, g, services, done, next_queues, fifo) -> None:
    """Per-round invariants: the queue recurrence, work conservation, and
    agreement between queue lengths and the FIFO group mass."""
    expected = np.maximum(0, queues + g - services)
    if not np.array_equal(next_queues, expected):
        raise AssertionError("queue recurrence violated")
    if not np.array_equal(done, np.minimum(queues + g, services)):
        raise AssertionError("work conservation violated")
    for srv, groups in enumerate(fifo):
        if sum(c for _, c in groups) != int(next_queues[srv]):
            raise AssertionError("FIFO group mass out of sync with queue length")

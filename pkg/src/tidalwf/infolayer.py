"""Queue-length information models.

Three modes: complete information (every dispatcher reads the true queue
vector), local partial views (each dispatcher refreshes a random fraction
eta of its per-server array at the end of every round, plus whatever it
learned by sending jobs), and timestamped views (servers keep arrays too,
and every communication link merges the two arrays entrywise, keeping the
fresher timestamp - a last-writer-wins register per server entry).

Timestamps are round numbers; -1 marks a never-observed entry, which
optimistically defaults to an estimate of 0 to match the empty start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import Stream

NEVER = -1


@dataclass
class LocalView:
    """One party's per-server (estimate, timestamp) array."""

    estimates: np.ndarray
    stamps: np.ndarray

    @classmethod
    def empty(cls, n_servers: int) -> "LocalView":
        return cls(
            estimates=np.zeros(n_servers, dtype=np.int64),
            stamps=np.full(n_servers, NEVER, dtype=np.int64),
        )

    def copy(self) -> "LocalView":
        return LocalView(self.estimates.copy(), self.stamps.copy())

    def observe(self, server: int, length: int, round_no: int) -> None:
        self.estimates[server] = length
        self.stamps[server] = round_no


def eta_sample_count(eta: float, n_servers: int) -> int:
    """Servers sampled per dispatcher per round: ceil(eta * N)."""
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    return min(n_servers, math.ceil(eta * n_servers))


def merge_views(a: LocalView, b: LocalView) -> tuple[LocalView, LocalView]:
    """Symmetric entrywise merge: the larger timestamp wins, ties keep the
    receiver's own entry. Returns the two updated views (inputs untouched)."""
    if a.estimates.shape != b.estimates.shape:
        raise ValueError("views must cover the same number of servers")
    out_a, out_b = a.copy(), b.copy()
    merge_arrays_inplace(out_a.estimates, out_a.stamps, out_b.estimates, out_b.stamps)
    return out_a, out_b


def merge_arrays_inplace(est_a, ts_a, est_b, ts_b) -> None:
    """Entrywise last-writer-wins merge of two (estimate, stamp) arrays."""
    a_newer = ts_a > ts_b
    b_newer = ts_b > ts_a
    est_a[b_newer] = est_b[b_newer]
    ts_a[b_newer] = ts_b[b_newer]
    est_b[a_newer] = est_a[a_newer]
    ts_b[a_newer] = ts_a[a_newer]


def end_of_round_update(
    views: list[LocalView],
    true_queues: np.ndarray,
    links_this_round: list[list[int]],
    eta: float,
    streams: list[Stream],
    round_no: int,
) -> int:
    """Phase-4 refresh of the dispatchers' local arrays.

    Every dispatcher overwrites the entries of the servers it exchanged jobs
    with this round, then of ceil(eta * N) servers sampled uniformly without
    replacement. ``true_queues`` is the post-departure state. Returns the
    number of sampled links established.
    """
    n = int(true_queues.shape[0])
    k = eta_sample_count(eta, n)
    sampled_links = 0
    for m, view in enumerate(views):
        for srv in links_this_round[m]:
            view.observe(srv, int(true_queues[srv]), round_no)
        if k == n:
            view.estimates[:] = true_queues
            view.stamps[:] = round_no
        else:
            for srv in streams[m].sample_distinct(n, k):
                view.observe(int(srv), int(true_queues[srv]), round_no)
        sampled_links += k
    return sampled_links


def refresh_fixed(view: LocalView, true_queues: np.ndarray, count: int, stream: Stream, round_no: int) -> None:
    """Fixed-count variant of the eta sampler (LSQ-Sample style)."""
    n = int(true_queues.shape[0])
    for srv in stream.sample_distinct(n, min(count, n)):
        view.observe(int(srv), int(true_queues[srv]), round_no)


def timestamped_round_update(
    dispatcher_views: list[LocalView],
    server_views: list[LocalView],
    true_queues: np.ndarray,
    links_this_round: list[list[int]],
    eta: float,
    streams: list[Stream],
    round_no: int,
) -> int:
    """Phase-4 update when servers gossip their arrays too.

    Order is fixed for determinism: servers first refresh their own entry,
    then dispatch links merge in (dispatcher, server) order, then sampled
    links merge in (dispatcher, sorted server) order. Returns the number of
    sampled links.
    """
    n = int(true_queues.shape[0])
    k = eta_sample_count(eta, n)
    for srv, view in enumerate(server_views):
        view.observe(srv, int(true_queues[srv]), round_no)
    for m, dview in enumerate(dispatcher_views):
        for srv in sorted(links_this_round[m]):
            sview = server_views[srv]
            merge_arrays_inplace(dview.estimates, dview.stamps, sview.estimates, sview.stamps)
    sampled_links = 0
    for m, dview in enumerate(dispatcher_views):
        picks = sorted(int(x) for x in streams[m].sample_distinct(n, k))
        for srv in picks:
            sview = server_views[srv]
            merge_arrays_inplace(dview.estimates, dview.stamps, sview.estimates, sview.stamps)
        sampled_links += k
    return sampled_links

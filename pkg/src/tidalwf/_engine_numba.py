"""Compiled round loop.

One @njit kernel runs the whole simulation. It reproduces the numpy
engine's trajectories bit for bit: identical substream keying, identical
draw order, and identical float arithmetic (policy probabilities are single
divisions of exact integers, so both backends produce the same doubles).
Import this module only when numba is available; the engine module guards
that and falls back to the pure numpy path.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

GAMMA_U = np.uint64(0x9E3779B97F4A7C15)
MIX1_U = np.uint64(0xBF58476D1CE4E5B9)
MIX2_U = np.uint64(0x94D049BB133111EB)
TWO_NEG53 = 2.0**-53

TAG_ARRIVALS = 1
TAG_SERVICES = 2
TAG_POLICY = 3
TAG_COMM = 4
TAG_IDLE_NOTIFY = 5

KIND_RANDOM = 0
KIND_JSQ = 1
KIND_JSQD = 2
KIND_JIQ = 3
KIND_LSQ = 4
KIND_WFIE = 5
KIND_STWF = 6
KIND_UTWF = 7

INFO_COMPLETE = 0
INFO_LOCAL = 1
INFO_TS = 2


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * MIX1_U
    z = (z ^ (z >> np.uint64(27))) * MIX2_U
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _sub_base(seed, tag, entity, round_no):
    s = _mix64(seed)
    s = _mix64(s ^ (np.uint64(tag) * GAMMA_U))
    s = _mix64(s ^ (np.uint64(entity) * GAMMA_U))
    return _mix64(s ^ (np.uint64(round_no) * GAMMA_U))


@njit(cache=True, inline="always")
def _u64_at(base, i):
    return _mix64(base + np.uint64(i) * GAMMA_U)


@njit(cache=True, inline="always")
def _uniform_at(base, i):
    return (_u64_at(base, i) >> np.uint64(11)) * TWO_NEG53


@njit(cache=True, inline="always")
def _randint(base, cnt, k):
    cnt += 1
    return np.int64(_u64_at(base, cnt) % np.uint64(k)), cnt


@njit(cache=True)
def _draw_poisson(base, cnt, lam, exp_neg_lam):
    if lam <= 0.0:
        return 0, cnt
    if lam < 30.0:
        cnt += 1
        u = _uniform_at(base, cnt)
        p = exp_neg_lam
        cdf = p
        k = 0
        while u >= cdf and k < 20000:
            k += 1
            p *= lam / k
            cdf += p
        return k, cnt
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        cnt += 1
        u = _uniform_at(base, cnt) - 0.5
        cnt += 1
        v = _uniform_at(base, cnt)
        us = 0.5 - abs(u)
        k = int(math.floor((2.0 * a / us + b) * u + lam + 0.43))
        if us >= 0.07 and v <= v_r:
            return k, cnt
        if k < 0 or (us < 0.013 and v > us):
            continue
        if math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b) <= (
            k * loglam - lam - math.lgamma(k + 1.0)
        ):
            return k, cnt


@njit(cache=True)
def _draw_geometric(base, cnt, mu):
    k = 0
    while True:
        cnt += 1
        if _uniform_at(base, cnt) < mu:
            k += 1
        else:
            return k, cnt


@njit(cache=True)
def _sample_distinct(base, cnt, n, k, perm):
    """Partial Fisher-Yates; the k picks land in perm[:k]."""
    for i in range(n):
        perm[i] = i
    for i in range(k):
        r, cnt = _randint(base, cnt, n - i)
        j = i + r
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    return cnt


@njit(cache=True)
def _argmin_tiebreak(values, n, base, cnt):
    mn = values[0]
    ties = 1
    for i in range(1, n):
        v = values[i]
        if v < mn:
            mn = v
            ties = 1
        elif v == mn:
            ties += 1
    r, cnt = _randint(base, cnt, ties)
    seen = 0
    for i in range(n):
        if values[i] == mn:
            if seen == r:
                return i, cnt
            seen += 1
    return n - 1, cnt  # unreachable


@njit(cache=True)
def _support_stats(sorted_q, n, a):
    """Support size j and integer A so that the water level equals A / j."""
    prefix = np.int64(0)
    j = np.int64(1)
    while j < n and a + prefix + sorted_q[j - 1] > j * sorted_q[j]:
        prefix += sorted_q[j - 1]
        j += 1
    return j, a + prefix + sorted_q[j - 1]


@njit(cache=True)
def _fill_uniform_argmin(view, n, probs):
    mn = view[0]
    ties = 1
    for i in range(1, n):
        v = view[i]
        if v < mn:
            mn = v
            ties = 1
        elif v == mn:
            ties += 1
    share = 1.0 / ties
    for i in range(n):
        probs[i] = share if view[i] == mn else 0.0


@njit(cache=True)
def _fill_stwf(view, sorted_view, n, a_est, probs):
    if a_est == 1:
        _fill_uniform_argmin(view, n, probs)
        return
    j, big_a = _support_stats(sorted_view, n, a_est)
    den = float(j * (a_est - 1))
    for i in range(n):
        num = big_a - j * view[i] - 1
        probs[i] = num / den if num > 0 else 0.0


@njit(cache=True)
def _fill_wfie(view, sorted_view, n, a_est, probs):
    j, big_a = _support_stats(sorted_view, n, a_est)
    den = float(j * a_est)
    for i in range(n):
        num = big_a - j * view[i]
        probs[i] = num / den if num > 0 else 0.0


@njit(cache=True)
def _fill_utwf(view, sorted_view, n, a_m, m, probs):
    if m == 1:
        _fill_uniform_argmin(view, n, probs)
        return
    j_others, a_others = _support_stats(sorted_view, n, (m - 1) * a_m)
    j, big_a = _support_stats(sorted_view, n, m * a_m)
    u_size = np.int64(0)
    spill = np.int64(0)
    for i in range(n):
        if a_others - j_others * view[i] > 0:
            u_size += 1
        else:
            fill = big_a - j * view[i]
            if fill > 0:
                spill += fill
    den = float(j * u_size * (m - 1) * a_m)
    shortfall = j * a_m - spill
    for i in range(n):
        if a_others - j_others * view[i] > 0:
            num = u_size * (big_a - j * view[i]) - shortfall
            probs[i] = num / den if num > 0 else 0.0
        else:
            probs[i] = 0.0


@njit(cache=True)
def _draw_categorical(probs, n, base, cnt):
    cnt += 1
    u = _uniform_at(base, cnt)
    acc = 0.0
    last = -1
    for i in range(n):
        p = probs[i]
        if p > 0.0:
            last = i
            acc += p
            if u < acc:
                return i, cnt
    return last, cnt


@njit(cache=True)
def _bump_hist(hist, resp, take):
    if resp >= hist.shape[0]:
        size = hist.shape[0]
        while size <= resp:
            size *= 2
        grown = np.zeros(size, dtype=np.int64)
        grown[: hist.shape[0]] = hist
        hist = grown
    hist[resp] += take
    return hist


@njit(cache=True)
def _merge_rows(d_est, d_ts, s_est, s_ts, n):
    for i in range(n):
        if s_ts[i] > d_ts[i]:
            d_est[i] = s_est[i]
            d_ts[i] = s_ts[i]
        elif d_ts[i] > s_ts[i]:
            s_est[i] = d_est[i]
            s_ts[i] = d_ts[i]


@njit(cache=True)
def simulate_kernel(
    seed,
    n,
    m,
    t_rounds,
    warmup,
    lam,
    exp_neg_lam,
    mu,
    kind,
    d_param,
    info,
    eta_k,
    splittable,
):
    queues = np.zeros(n, dtype=np.int64)
    queue_sum = np.zeros(t_rounds, dtype=np.int64)
    hist = np.zeros(1024, dtype=np.int64)

    arrivals = np.zeros(m, dtype=np.int64)
    g = np.zeros(n, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    probs = np.zeros(n, dtype=np.float64)
    work = np.zeros(n, dtype=np.int64)
    perm = np.zeros(n, dtype=np.int64)
    picks = np.zeros(n, dtype=np.int64)
    sortbuf = np.zeros(n, dtype=np.int64)

    # FIFO job groups per server: (arrival round, job count) ring buffers.
    cap = 1024
    grp_round = np.zeros((n, cap), dtype=np.int64)
    grp_count = np.zeros((n, cap), dtype=np.int64)
    grp_head = np.zeros(n, dtype=np.int64)
    grp_len = np.zeros(n, dtype=np.int64)

    needs_views = info != INFO_COMPLETE or kind == KIND_LSQ
    est = np.zeros((m if needs_views else 1, n), dtype=np.int64)
    est_ts = np.full((m if needs_views else 1, n), -1, dtype=np.int64)
    ns = n if info == INFO_TS else 1
    srv_est = np.zeros((ns, ns if ns > 1 else n), dtype=np.int64)
    srv_ts = np.full((ns, ns if ns > 1 else n), -1, dtype=np.int64)

    iq = np.zeros((m if kind == KIND_JIQ else 1, n), dtype=np.int64)
    iq_head = np.zeros(m, dtype=np.int64)
    iq_len = np.zeros(m, dtype=np.int64)
    iq_member = np.zeros((m if kind == KIND_JIQ else 1, n), dtype=np.uint8)
    prev_idle = np.ones(n, dtype=np.uint8)
    sent = np.zeros((m if info != INFO_COMPLETE else 1, n), dtype=np.uint8)

    arrivals_total = np.int64(0)
    completions_total = np.int64(0)
    measured_arrivals = np.int64(0)
    measured_completions = np.int64(0)
    links = np.int64(0)

    prob_policy = kind == KIND_WFIE or kind == KIND_STWF or kind == KIND_UTWF

    for t in range(t_rounds):
        total_q = np.int64(0)
        for i in range(n):
            total_q += queues[i]
        queue_sum[t] = total_q

        # Phase 1: arrivals.
        round_arrivals = np.int64(0)
        for mi in range(m):
            abase = _sub_base(seed, TAG_ARRIVALS, mi, t)
            a_val, _ = _draw_poisson(abase, 0, lam, exp_neg_lam)
            arrivals[mi] = a_val
            round_arrivals += a_val
        arrivals_total += round_arrivals
        if t >= warmup:
            measured_arrivals += round_arrivals

        # Phase 2: dispatching.
        for i in range(n):
            g[i] = 0
        if info != INFO_COMPLETE:
            for mi in range(m):
                for i in range(n):
                    sent[mi, i] = 0
        shared_sorted = False
        for mi in range(m):
            a_m = arrivals[mi]
            if a_m == 0:
                continue
            pbase = _sub_base(seed, TAG_POLICY, mi, t)
            pcnt = 0
            for i in range(n):
                counts[i] = 0

            if prob_policy:
                if info == INFO_COMPLETE:
                    view = queues
                    if not shared_sorted:
                        for i in range(n):
                            sortbuf[i] = queues[i]
                        sortbuf.sort()
                        shared_sorted = True
                else:
                    view = est[mi]
                    for i in range(n):
                        sortbuf[i] = view[i]
                    sortbuf.sort()
                if kind == KIND_WFIE:
                    _fill_wfie(view, sortbuf, n, m * a_m, probs)
                elif kind == KIND_STWF:
                    _fill_stwf(view, sortbuf, n, m * a_m, probs)
                else:
                    _fill_utwf(view, sortbuf, n, a_m, m, probs)
                if splittable:
                    for _ in range(a_m):
                        srv, pcnt = _draw_categorical(probs, n, pbase, pcnt)
                        counts[srv] += 1
                else:
                    srv, pcnt = _draw_categorical(probs, n, pbase, pcnt)
                    counts[srv] = a_m
            elif kind == KIND_RANDOM:
                if splittable:
                    for _ in range(a_m):
                        srv, pcnt = _randint(pbase, pcnt, n)
                        counts[srv] += 1
                else:
                    srv, pcnt = _randint(pbase, pcnt, n)
                    counts[srv] = a_m
            elif kind == KIND_JSQ:
                if splittable:
                    for i in range(n):
                        work[i] = queues[i]
                    for _ in range(a_m):
                        srv, pcnt = _argmin_tiebreak(work, n, pbase, pcnt)
                        counts[srv] += 1
                        work[srv] += 1
                else:
                    srv, pcnt = _argmin_tiebreak(queues, n, pbase, pcnt)
                    counts[srv] = a_m
            elif kind == KIND_JSQD:
                if splittable:
                    for i in range(n):
                        work[i] = queues[i]
                    for _ in range(a_m):
                        pcnt = _sample_distinct(pbase, pcnt, n, d_param, perm)
                        srv, pcnt = _pick_probed(work, perm, d_param, pbase, pcnt)
                        counts[srv] += 1
                        work[srv] += 1
                else:
                    pcnt = _sample_distinct(pbase, pcnt, n, d_param, perm)
                    srv, pcnt = _pick_probed(queues, perm, d_param, pbase, pcnt)
                    counts[srv] = a_m
            elif kind == KIND_JIQ:
                if splittable:
                    for _ in range(a_m):
                        if iq_len[mi] > 0:
                            srv = iq[mi, iq_head[mi]]
                            iq_head[mi] = (iq_head[mi] + 1) % n
                            iq_len[mi] -= 1
                            iq_member[mi, srv] = 0
                        else:
                            srv, pcnt = _randint(pbase, pcnt, n)
                        counts[srv] += 1
                else:
                    if iq_len[mi] > 0:
                        srv = iq[mi, iq_head[mi]]
                        iq_head[mi] = (iq_head[mi] + 1) % n
                        iq_len[mi] -= 1
                        iq_member[mi, srv] = 0
                    else:
                        srv, pcnt = _randint(pbase, pcnt, n)
                    counts[srv] = a_m
            else:  # KIND_LSQ
                est_row = est[mi]
                if splittable:
                    for _ in range(a_m):
                        srv, pcnt = _argmin_tiebreak(est_row, n, pbase, pcnt)
                        counts[srv] += 1
                        est_row[srv] += 1
                else:
                    srv, pcnt = _argmin_tiebreak(est_row, n, pbase, pcnt)
                    counts[srv] = a_m
                    est_row[srv] += a_m

            for i in range(n):
                c = counts[i]
                if c > 0:
                    g[i] += c
                    links += 1
                    if info != INFO_COMPLETE:
                        sent[mi, i] = 1

        for i in range(n):
            if g[i] > 0:
                if grp_len[i] == cap:
                    grp_round, grp_count, grp_head, cap = _grow_groups(
                        grp_round, grp_count, grp_head, grp_len, cap
                    )
                pos = (grp_head[i] + grp_len[i]) % cap
                grp_round[i, pos] = t
                grp_count[i, pos] = g[i]
                grp_len[i] += 1

        # Phase 3: departures.
        round_done = np.int64(0)
        for i in range(n):
            sbase = _sub_base(seed, TAG_SERVICES, i, t)
            s_val, _ = _draw_geometric(sbase, 0, mu)
            avail = queues[i] + g[i]
            done = s_val if s_val < avail else avail
            remaining = done
            while remaining > 0:
                h = grp_head[i]
                r = grp_round[i, h]
                c = grp_count[i, h]
                take = c if c <= remaining else remaining
                if r >= warmup:
                    hist = _bump_hist(hist, t - r + 1, take)
                    measured_completions += take
                if take == c:
                    grp_head[i] = (h + 1) % cap
                    grp_len[i] -= 1
                else:
                    grp_count[i, h] = c - take
                remaining -= take
            queues[i] = avail - done
            round_done += done
        completions_total += round_done

        # Phase 4: communication.
        if kind == KIND_JIQ:
            for i in range(n):
                idle_now = queues[i] == 0
                if idle_now and (prev_idle[i] == 0 or g[i] > 0):
                    nbase = _sub_base(seed, TAG_IDLE_NOTIFY, i, t)
                    target, _ = _randint(nbase, 0, m)
                    if iq_member[target, i] == 0:
                        pos = (iq_head[target] + iq_len[target]) % n
                        iq[target, pos] = i
                        iq_len[target] += 1
                        iq_member[target, i] = 1
                        links += 1
                prev_idle[i] = 1 if idle_now else 0
        elif kind == KIND_LSQ:
            k = d_param if d_param < n else n
            for mi in range(m):
                cbase = _sub_base(seed, TAG_COMM, mi, t)
                _sample_distinct(cbase, 0, n, k, perm)
                for i in range(k):
                    srv = perm[i]
                    est[mi, srv] = queues[srv]
                    est_ts[mi, srv] = t
                links += k

        if info == INFO_LOCAL:
            for mi in range(m):
                for i in range(n):
                    if sent[mi, i] == 1:
                        est[mi, i] = queues[i]
                        est_ts[mi, i] = t
                if eta_k == n:
                    for i in range(n):
                        est[mi, i] = queues[i]
                        est_ts[mi, i] = t
                else:
                    cbase = _sub_base(seed, TAG_COMM, mi, t)
                    _sample_distinct(cbase, 0, n, eta_k, perm)
                    for i in range(eta_k):
                        srv = perm[i]
                        est[mi, srv] = queues[srv]
                        est_ts[mi, srv] = t
                links += eta_k
        elif info == INFO_TS:
            for i in range(n):
                srv_est[i, i] = queues[i]
                srv_ts[i, i] = t
            for mi in range(m):
                for i in range(n):
                    if sent[mi, i] == 1:
                        _merge_rows(est[mi], est_ts[mi], srv_est[i], srv_ts[i], n)
            for mi in range(m):
                cbase = _sub_base(seed, TAG_COMM, mi, t)
                _sample_distinct(cbase, 0, n, eta_k, perm)
                for i in range(eta_k):
                    picks[i] = perm[i]
                picks[:eta_k].sort()
                for i in range(eta_k):
                    srv = picks[i]
                    _merge_rows(est[mi], est_ts[mi], srv_est[srv], srv_ts[srv], n)
                links += eta_k

    return (
        hist,
        queue_sum,
        arrivals_total,
        completions_total,
        measured_arrivals,
        measured_completions,
        links,
        queues,
    )


@njit(cache=True)
def _pick_probed(values, perm, d, base, cnt):
    """Shortest among the d probed servers perm[:d], ties uniform in probe
    order (mirrors the reference argmin over the fancy-indexed view)."""
    mn = values[perm[0]]
    ties = 1
    for i in range(1, d):
        v = values[perm[i]]
        if v < mn:
            mn = v
            ties = 1
        elif v == mn:
            ties += 1
    r, cnt = _randint(base, cnt, ties)
    seen = 0
    for i in range(d):
        if values[perm[i]] == mn:
            if seen == r:
                return perm[i], cnt
            seen += 1
    return perm[d - 1], cnt  # unreachable


@njit(cache=True)
def _grow_groups(grp_round, grp_count, grp_head, grp_len, cap):
    new_cap = cap * 2
    n = grp_round.shape[0]
    nr = np.zeros((n, new_cap), dtype=np.int64)
    nc = np.zeros((n, new_cap), dtype=np.int64)
    for i in range(n):
        for k in range(grp_len[i]):
            pos = (grp_head[i] + k) % cap
            nr[i, k] = grp_round[i, pos]
            nc[i, k] = grp_count[i, pos]
        grp_head[i] = 0
    return nr, nc, grp_head, new_cap

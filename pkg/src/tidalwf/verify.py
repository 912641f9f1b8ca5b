"""Self-verification suites.

Every check returns a CheckResult with a serialized witness instance on
failure, so a failing run can be reproduced directly. The probability
checks accept the policy functions as arguments; deliberately injecting a
broken policy must make the suite fail (that property is itself tested).

Levels: "fast" keeps instance counts small enough for an interactive run;
"full" uses the counts the acceptance criteria demand.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import oracle, policies
from .config import make_config
from .engine import run_simulation
from .rng import Stream, mix64
from .waterlevel import target_allocation, water_level


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""
    instance: dict | None = field(default=None)

    def line(self) -> str:
        status = "pass" if self.ok else "FAIL"
        msg = f"{status}  {self.name}"
        if self.detail:
            msg += f"  ({self.detail})"
        if not self.ok and self.instance is not None:
            msg += "\n      instance: " + json.dumps(self.instance, sort_keys=True)
        return msg


def _instance_stream(label: int) -> Stream:
    return Stream(mix64(0xC0FFEE ^ label))


def _random_queues(s: Stream, max_n: int, max_q: int) -> np.ndarray:
    n = 1 + s.randint(max_n)
    return np.array([s.randint(max_q + 1) for _ in range(n)], dtype=np.int64)


def check_golden_examples(
    stwf_fn=policies.stwf_probs,
    utwf_fn=policies.utwf_probs,
    wfie_fn=policies.wfie_probs,
) -> CheckResult:
    """The two-server walkthrough values, exact."""
    name = "golden-examples"
    q = np.array([1, 0], dtype=np.int64)
    cases = [
        ("water level a=2", water_level(q, 2) == Fraction(3, 2)),
        ("water level a=3", water_level(q, 3) == Fraction(2)),
        ("fills a=2", target_allocation(q, 2).g_star == (Fraction(1, 2), Fraction(3, 2))),
        ("stwf a=2", np.array_equal(stwf_fn(q, 2), [0.0, 1.0])),
        ("stwf a=3", np.array_equal(stwf_fn(q, 3), [0.25, 0.75])),
        ("wfie a=2", np.array_equal(wfie_fn(q, 2), [0.25, 0.75])),
        ("wfie a=3", np.array_equal(wfie_fn(q, 3), [float(Fraction(1, 3)), float(Fraction(2, 3))])),
        ("utwf coincides", np.array_equal(utwf_fn(q, 1, 2), [0.0, 1.0])),
    ]
    # Three dispatchers, one job each: chance that every job lands on the
    # longer queue, under each policy's own probabilities.
    twf = outcome_mass_all_to(q, 3, stwf_fn(q, 3), server=0)
    wfe = outcome_mass_all_to(q, 3, wfie_fn(q, 3), server=0)
    cases.append(("twf worst case 1/64", twf == Fraction(1, 64)))
    cases.append(("wfie worst case 1/27", wfe == Fraction(1, 27)))
    bad = [label for label, ok in cases if not ok]
    if bad:
        return CheckResult(name, False, "failed: " + ", ".join(bad), {"cases": bad})
    return CheckResult(name, True, f"{len(cases)} exact values")


def outcome_mass_all_to(queues, m_dispatchers: int, p, server: int) -> Fraction:
    """Probability, under per-dispatcher single-job routing with vector p,
    that every job lands on ``server`` (via exhaustive enumeration).

    Policy outputs are correctly rounded small rationals, so they are
    reconstructed exactly before enumerating.
    """
    exact = [Fraction(float(x)).limit_denominator(10**9) for x in p]
    dist = oracle.outcome_distribution([1] * m_dispatchers, [exact] * m_dispatchers, splittable=False)
    total = m_dispatchers
    target = tuple(total if i == server else 0 for i in range(len(queues)))
    return dist.get(target, Fraction(0))


def check_conservation(count: int) -> CheckResult:
    """Sum of fills equals the arrival count, exactly, on random instances."""
    name = "water-level-conservation"
    s = _instance_stream(1)
    for i in range(count):
        q = _random_queues(s, 64, 100)
        a = s.randint(501)
        ta = target_allocation(q, a)
        if ta.total_fill != a:
            return CheckResult(
                name, False, f"instance {i}", {"queues": q.tolist(), "a": a, "sum": str(ta.total_fill)}
            )
    return CheckResult(name, True, f"{count} instances")


def check_level_property(count: int) -> CheckResult:
    """Filled servers sit exactly at the level; unfilled ones at or above."""
    name = "water-level-structure"
    s = _instance_stream(2)
    for i in range(count):
        q = _random_queues(s, 32, 50)
        a = s.randint(200)
        ta = target_allocation(q, a)
        for qn, gn, qs in zip(q, ta.g_star, ta.q_star):
            ok = (gn > 0 and int(qn) + gn == ta.water_level) or (gn == 0 and int(qn) >= ta.water_level)
            ok = ok and qs == max(Fraction(int(qn)), ta.water_level)
            if not ok:
                return CheckResult(name, False, f"instance {i}", {"queues": q.tolist(), "a": a})
    return CheckResult(name, True, f"{count} instances")


def check_monotonicity(count: int) -> CheckResult:
    """Strictly increasing in a; entrywise non-decreasing in Q."""
    name = "water-level-monotonicity"
    s = _instance_stream(3)
    for i in range(count):
        q = _random_queues(s, 16, 30)
        a = s.randint(60)
        wl = water_level(q, a)
        if not water_level(q, a + 1) > wl:
            return CheckResult(name, False, f"a-monotonicity, instance {i}", {"queues": q.tolist(), "a": a})
        bumped = q.copy()
        bumped[s.randint(len(q))] += 1 + s.randint(3)
        if water_level(bumped, a) < wl:
            return CheckResult(name, False, f"Q-monotonicity, instance {i}", {"queues": q.tolist(), "a": a})
    return CheckResult(name, True, f"{count} instances")


def check_permutation_equivariance(count: int) -> CheckResult:
    name = "permutation-equivariance"
    s = _instance_stream(4)
    for i in range(count):
        q = _random_queues(s, 10, 20)
        n = len(q)
        a = 1 + s.randint(20)
        m = 2 + s.randint(3)
        perm = np.array(s.sample_distinct(n, n), dtype=np.int64)
        qp = q[perm]
        if water_level(qp, a) != water_level(q, a):
            return CheckResult(name, False, f"level, instance {i}", {"queues": q.tolist(), "a": a})
        for fn in (
            lambda v: policies.stwf_probs(v, a),
            lambda v: policies.wfie_probs(v, a),
            lambda v: policies.utwf_probs(v, max(1, a // m), m),
        ):
            if not np.array_equal(fn(q)[perm], fn(qp)):
                return CheckResult(name, False, f"policy, instance {i}", {"queues": q.tolist(), "a": a, "m": m})
    return CheckResult(name, True, f"{count} instances")


def check_incremental_pour(count: int) -> CheckResult:
    """Exact level matches a discretized pour on a 1/K grid within 2/K."""
    name = "incremental-pour-oracle"
    s = _instance_stream(5)
    for i in range(count):
        q = _random_queues(s, 6, 10)
        a = s.randint(13)
        k_steps = len(q) * 1000
        exact = float(water_level(q, a))
        lo = float(q.min())
        levels = lo + np.arange(int((a + 1) * k_steps) + 1) / k_steps
        capacity = np.maximum(0.0, levels[:, None] - q[None, :]).sum(axis=1)
        naive = levels[np.searchsorted(capacity, a, side="right") - 1] if a > 0 else lo
        if abs(exact - naive) > 2.0 / k_steps:
            return CheckResult(
                name, False, f"instance {i}", {"queues": q.tolist(), "a": a, "exact": exact, "naive": naive}
            )
    return CheckResult(name, True, f"{count} instances")


def check_probability_contracts(count: int, stwf_fn=policies.stwf_probs, utwf_fn=policies.utwf_probs, wfie_fn=policies.wfie_probs) -> CheckResult:
    """Every policy vector is non-negative and sums to 1 within 1e-9; the
    TWF supports follow the exact rational rules."""
    name = "probability-contracts"
    s = _instance_stream(6)
    for i in range(count):
        q = _random_queues(s, 12, 25)
        a_m = 1 + s.randint(5)
        m = 1 + s.randint(4)
        a_est = m * a_m
        ta = target_allocation(q, a_est)
        inv_sup = Fraction(1, ta.support_count) if ta.support_count else Fraction(0)
        for label, p in (
            ("stwf", stwf_fn(q, a_est)),
            ("utwf", utwf_fn(q, a_m, m)),
            ("wfie", wfie_fn(q, a_est)),
        ):
            if (p < 0).any() or (p > 1).any() or abs(float(p.sum()) - 1.0) > 1e-9:
                return CheckResult(name, False, f"{label} simplex, instance {i}", _pinst(q, a_m, m))
        if a_est > 1:
            p = stwf_fn(q, a_est)
            for n in range(len(q)):
                if (p[n] > 0) != (ta.g_star[n] > inv_sup):
                    return CheckResult(name, False, f"stwf support, instance {i}", _pinst(q, a_m, m))
        if m > 1:
            wl_others = water_level(q, (m - 1) * a_m)
            p = utwf_fn(q, a_m, m)
            for n in range(len(q)):
                if (p[n] > 0) != (int(q[n]) < wl_others):
                    return CheckResult(name, False, f"utwf support, instance {i}", _pinst(q, a_m, m))
    return CheckResult(name, True, f"{count} instances")


def _pinst(q, a_m, m) -> dict:
    return {"queues": q.tolist(), "a_m": int(a_m), "m": int(m)}


def check_coincidence(count: int, stwf_fn=policies.stwf_probs, utwf_fn=policies.utwf_probs) -> CheckResult:
    """With single-job batches the two TWF variants are the same policy."""
    name = "single-job-coincidence"
    s = _instance_stream(7)
    worst = 0.0
    for i in range(count):
        q = _random_queues(s, 16, 30)
        m = 2 + s.randint(5)
        diff = float(np.max(np.abs(utwf_fn(q, 1, m) - stwf_fn(q, m))))
        worst = max(worst, diff)
        if diff > 1e-12:
            return CheckResult(name, False, f"instance {i}, diff {diff:g}", _pinst(q, 1, m))
    return CheckResult(name, True, f"{count} instances, max diff {worst:g}")


def check_degenerate_cases(count: int) -> CheckResult:
    """a=1 (splittable) and M=1 (unsplittable) collapse to shortest-queue."""
    name = "degenerate-uniform-argmin"
    s = _instance_stream(8)
    for i in range(count):
        q = _random_queues(s, 12, 12)
        mins = np.flatnonzero(q == q.min())
        expect = np.zeros(len(q))
        expect[mins] = 1.0 / len(mins)
        if not np.array_equal(policies.stwf_probs(q, 1), expect):
            return CheckResult(name, False, f"stwf, instance {i}", {"queues": q.tolist()})
        if not np.array_equal(policies.utwf_probs(q, 1 + s.randint(4), 1), expect):
            return CheckResult(name, False, f"utwf, instance {i}", {"queues": q.tolist()})
    return CheckResult(name, True, f"{count} instances")


def check_objective_agreement(count: int) -> CheckResult:
    """Closed-form objectives equal exhaustive enumeration within 1e-9."""
    name = "objective-vs-enumeration"
    s = _instance_stream(9)
    for i in range(count):
        n = 2 + s.randint(2)
        q = np.array([s.randint(5) for _ in range(n)], dtype=np.int64)
        m = 1 + s.randint(3)
        a_m = 1 + s.randint(2)
        p = np.array([s.uniform() + 1e-3 for _ in range(n)])
        p /= p.sum()
        ctx_s = oracle.split_context(q, m * a_m)
        ref_s = float(oracle.enumerate_outcomes(q, [a_m] * m, [p] * m, splittable=True))
        if abs(oracle.objective_split(ctx_s, p) - ref_s) > 1e-9:
            return CheckResult(name, False, f"split, instance {i}", _oinst(q, a_m, m, p))
        ctx_u = oracle.unsplit_context(q, a_m, m)
        ref_u = float(oracle.enumerate_outcomes(q, [a_m] * m, [p] * m, splittable=False))
        if abs(oracle.objective_unsplit(ctx_u, p) - ref_u) > 1e-9:
            return CheckResult(name, False, f"unsplit, instance {i}", _oinst(q, a_m, m, p))
    return CheckResult(name, True, f"{count} instances x2 modes")


def _oinst(q, a_m, m, p) -> dict:
    return {"queues": q.tolist(), "a_m": int(a_m), "m": int(m), "p": [float(x) for x in p]}


def check_optimality(
    count: int,
    resolution: int = 50,
    stwf_fn=policies.stwf_probs,
    utwf_fn=policies.utwf_probs,
    wfie_fn=policies.wfie_probs,
) -> CheckResult:
    """The TWF vectors beat every grid point of the simplex (and WFiE)."""
    name = "grid-optimality"
    s = _instance_stream(10)
    for i in range(count):
        n = 2 + s.randint(3)
        q = np.array([s.randint(7) for _ in range(n)], dtype=np.int64)
        a = 2 + s.randint(5)
        ctx = oracle.split_context(q, a)
        _, f_grid = oracle.simplex_search(ctx, resolution)
        f_twf = oracle.objective_split(ctx, stwf_fn(q, a))
        f_wfe = oracle.objective_split(ctx, wfie_fn(q, a))
        if f_twf > f_grid + 1e-9 or f_twf > f_wfe + 1e-9:
            return CheckResult(
                name, False, f"split, instance {i}",
                {"queues": q.tolist(), "a": int(a), "f_twf": f_twf, "f_grid": f_grid, "f_wfie": f_wfe},
            )
        m = 2 + s.randint(2)
        a_m = 1 + s.randint(3)
        ctx_u = oracle.unsplit_context(q, a_m, m)
        _, fu_grid = oracle.simplex_search(ctx_u, resolution)
        fu_twf = oracle.objective_unsplit(ctx_u, utwf_fn(q, a_m, m))
        if fu_twf > fu_grid + 1e-9:
            return CheckResult(
                name, False, f"unsplit, instance {i}",
                {"queues": q.tolist(), "a_m": int(a_m), "m": int(m), "f_twf": fu_twf, "f_grid": fu_grid},
            )
    return CheckResult(name, True, f"{count} instances x2 modes, resolution {resolution}")


def check_argmin_reduction(count: int) -> CheckResult:
    """Dropping the constant terms leaves the same grid minimizers."""
    name = "reduced-objective-argmin"
    s = _instance_stream(11)
    res = 25
    for i in range(count):
        n = 2 + s.randint(2)
        q = np.array([s.randint(6) for _ in range(n)], dtype=np.int64)
        a = 2 + s.randint(5)
        ctx = oracle.split_context(q, a)
        grid = oracle._compositions(res, n).astype(np.float64) / res
        full = np.array([oracle.objective_split(ctx, p) for p in grid])
        reduced = (a - 1) * np.einsum("ij,ij->i", grid, grid) - 2.0 * (grid @ ctx.g_star)
        if abs(full[int(np.argmin(reduced))] - full.min()) > 1e-12:
            return CheckResult(name, False, f"split, instance {i}", {"queues": q.tolist(), "a": int(a)})
        m = 2 + s.randint(2)
        a_m = 1 + s.randint(3)
        ctx_u = oracle.unsplit_context(q, a_m, m)
        full_u = np.array([oracle.objective_unsplit(ctx_u, p) for p in grid])
        reduced_u = (m - 1) * a_m * np.einsum("ij,ij->i", grid, grid) - 2.0 * (grid @ ctx_u.g_star)
        if abs(full_u[int(np.argmin(reduced_u))] - full_u.min()) > 1e-12:
            return CheckResult(name, False, f"unsplit, instance {i}", {"queues": q.tolist(), "a_m": int(a_m), "m": int(m)})
    return CheckResult(name, True, f"{count} instances x2 modes")


def check_partition(count: int) -> CheckResult:
    """Brute force agrees with a subset-sum table; equal splits reach the
    target exactly under the implied deterministic assignment."""
    name = "partition-bruteforce"
    s = _instance_stream(12)
    for i in range(count):
        m = 2 + s.randint(19)  # up to 20 batches
        sizes = [1 + s.randint(30) for _ in range(m)]
        exists, gap, side = oracle.partition_bruteforce(sizes)
        total = sum(sizes)
        reachable = {0}
        for w in sizes:
            reachable |= {r + w for r in reachable}
        dp_exists = total % 2 == 0 and total // 2 in reachable
        if exists != dp_exists:
            return CheckResult(name, False, f"existence, instance {i}", {"sizes": sizes})
        side_sum = sum(sizes[k] for k in side)
        if abs(2 * side_sum - total) != gap:
            return CheckResult(name, False, f"gap, instance {i}", {"sizes": sizes, "side": side})
        if exists and m <= 12:
            probs = [[1, 0] if k in set(side) else [0, 1] for k in range(m)]
            value = oracle.enumerate_outcomes([0, 0], sizes, probs, splittable=False)
            if value != 0:
                return CheckResult(name, False, f"zero objective, instance {i}", {"sizes": sizes, "side": side})
    return CheckResult(name, True, f"{count} instances")


def check_merge_semantics(count: int) -> CheckResult:
    """Timestamped merges are idempotent and order-invariant when stamps
    are distinct (observed values are functions of their stamps)."""
    from .infolayer import LocalView, merge_views

    name = "timestamped-merge-semantics"
    s = _instance_stream(13)
    for i in range(count):
        n = 1 + s.randint(6)
        views = []
        for v in range(3):
            est = np.zeros(n, dtype=np.int64)
            ts = np.zeros(n, dtype=np.int64)
            for k in range(n):
                stamp = 3 * s.randint(40) + v  # distinct stamps across views
                ts[k] = stamp
                est[k] = stamp % 17  # value determined by stamp
            views.append(LocalView(est, ts))
        same, _ = merge_views(views[0], views[0])
        if same.estimates.tolist() != views[0].estimates.tolist():
            return CheckResult(name, False, f"idempotence, instance {i}")

        def fold(order):
            acc = views[order[0]].copy()
            for idx in order[1:]:
                acc, _ = merge_views(acc, views[idx])
            return acc

        ref = fold([0, 1, 2])
        for order in ([2, 1, 0], [1, 2, 0], [0, 2, 1]):
            out = fold(order)
            if out.estimates.tolist() != ref.estimates.tolist() or out.stamps.tolist() != ref.stamps.tolist():
                return CheckResult(name, False, f"order, instance {i}")
    return CheckResult(name, True, f"{count} instances")


def check_determinism() -> CheckResult:
    """Same config and seed, twice: identical result payloads."""
    name = "run-determinism"
    cfg = make_config(
        n_servers=8, m_dispatchers=3, mu=0.5, rounds=600, policy="utwf", rho=0.93, warmup=60, seed=99
    )
    a = run_simulation(cfg).to_dict()
    b = run_simulation(cfg).to_dict()
    if json.dumps(a, sort_keys=True) != json.dumps(b, sort_keys=True):
        return CheckResult(name, False, "payloads differ", {"config": cfg.to_dict()})
    return CheckResult(name, True)


def check_engine_agreement() -> CheckResult:
    """Compiled and numpy backends produce identical trajectories."""
    from .engine import numba_available, simulate_raw

    name = "engine-backend-agreement"
    if not numba_available():
        return CheckResult(name, True, "numba unavailable, numpy-only (validated)")
    for pol, split, eta in (("stwf", True, 1.0), ("utwf", False, 1.0), ("l-utwf", False, 0.25), ("utwf-ts", False, 0.25), ("jiq", True, 1.0), ("lsq2", False, 1.0)):
        cfg = make_config(
            n_servers=9, m_dispatchers=4, mu=0.5, rounds=500, policy=pol, rho=0.95, warmup=50, seed=2024, splittable=split, eta=eta
        )
        raw_a, _ = simulate_raw(cfg, backend="numpy", validate=True)
        raw_b, _ = simulate_raw(cfg, backend="numba")
        for x, y in zip(raw_a, raw_b):
            if isinstance(x, np.ndarray):
                size = max(x.shape[0], y.shape[0])
                xa = np.zeros(size, dtype=np.int64)
                ya = np.zeros(size, dtype=np.int64)
                xa[: x.shape[0]] = x
                ya[: y.shape[0]] = y
                same = bool(np.array_equal(xa, ya))
            else:
                same = int(x) == int(y)
            if not same:
                return CheckResult(name, False, f"policy {pol}", {"config": cfg.to_dict()})
    return CheckResult(name, True, "6 policy/mode combinations")


FAST_COUNTS = {
    "conservation": 2000,
    "structure": 300,
    "monotonicity": 300,
    "permutation": 200,
    "pour": 150,
    "contracts": 1000,
    "coincidence": 300,
    "degenerate": 300,
    "objective": 40,
    "optimality": 25,
    "argmin": 10,
    "partition": 30,
    "merge": 100,
}

FULL_COUNTS = {
    "conservation": 10_000,
    "structure": 1000,
    "monotonicity": 1000,
    "permutation": 500,
    "pour": 1000,
    "contracts": 10_000,
    "coincidence": 1000,
    "degenerate": 1000,
    "objective": 200,
    "optimality": 200,
    "argmin": 25,
    "partition": 100,
    "merge": 300,
}


def run_suite(level: str = "fast") -> list[CheckResult]:
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    c = FAST_COUNTS if level == "fast" else FULL_COUNTS
    return [
        check_golden_examples(),
        check_conservation(c["conservation"]),
        check_level_property(c["structure"]),
        check_monotonicity(c["monotonicity"]),
        check_permutation_equivariance(c["permutation"]),
        check_incremental_pour(c["pour"]),
        check_probability_contracts(c["contracts"]),
        check_coincidence(c["coincidence"]),
        check_degenerate_cases(c["degenerate"]),
        check_objective_agreement(c["objective"]),
        check_optimality(c["optimality"]),
        check_argmin_reduction(c["argmin"]),
        check_partition(c["partition"]),
        check_merge_semantics(c["merge"]),
        check_determinism(),
        check_engine_agreement(),
    ]

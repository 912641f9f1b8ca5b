"""Acceptance suite.

One test per criterion, run at full scale, each printing a pass/fail line
with its runtime. The simulation-heavy criteria share a cache of runs
(paired seeds across policies) and may fan out over two worker processes.
"""

import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from tidalwf import verify
from tidalwf.cli import main as cli_main
from tidalwf.config import make_config
from tidalwf.engine import run_simulation

SEEDS = (101, 102, 103, 104, 105)

_cache: dict = {}


def _report(criterion: str, ok: bool, started: float, detail: str = "") -> None:
    status = "pass" if ok else "FAIL"
    print(f"[acceptance] {criterion}: {status} ({time.time() - started:.1f}s) {detail}")


def _run_many(configs):
    if len(configs) >= 4 and (os.cpu_count() or 1) >= 2:
        with ProcessPoolExecutor(max_workers=2) as pool:
            return list(pool.map(run_simulation, configs, chunksize=1))
    return [run_simulation(c) for c in configs]


def _sim(policy: str, rho: float, splittable: bool, n=100, m=10, eta=1.0, rounds=100_000):
    """Cached runs over the paired seed list; returns one result per seed."""
    key = (policy, rho, splittable, n, m, eta, rounds)
    if key not in _cache:
        configs = [
            make_config(
                n_servers=n, m_dispatchers=m, mu=0.5, rounds=rounds, policy=policy,
                rho=rho, eta=eta, splittable=splittable, seed=seed,
            )
            for seed in SEEDS
        ]
        _cache[key] = _run_many(configs)
    return _cache[key]


def _seed_mean(results, field="mean_response"):
    if field == "mean_response":
        return float(np.mean([r.mean_response for r in results]))
    return float(np.mean([r.percentiles[field] for r in results]))


def _pooled_p99(results) -> int:
    """p99 of the histogram pooled over the paired seeds.

    Percentiles are integers, so averaging per-seed p99 values injects
    sub-round artifacts into comparisons between near-identical policies;
    pooling the five measurements gives one well-defined order statistic.
    """
    from tidalwf.engine import percentile_from_hist

    pooled: dict[int, int] = {}
    for r in results:
        for resp, count in r.metrics.response_histogram.items():
            pooled[resp] = pooled.get(resp, 0) + count
    return percentile_from_hist(pooled, 0.99)


def test_criterion_01_water_level_conservation():
    t0 = time.time()
    res = verify.check_conservation(10_000)
    elapsed = time.time() - t0
    ok = res.ok and elapsed < 5.0
    _report("1 water-level conservation", ok, t0, res.detail)
    assert res.ok, res.line()
    assert elapsed < 5.0


def test_criterion_02_golden_examples():
    t0 = time.time()
    res = verify.check_golden_examples()
    elapsed = time.time() - t0
    ok = res.ok and elapsed < 1.0
    _report("2 golden examples", ok, t0, res.detail)
    assert res.ok, res.line()
    assert elapsed < 1.0


def test_criterion_03_optimality_against_grid_and_enumeration():
    t0 = time.time()
    opt = verify.check_optimality(200, resolution=50)
    agree = verify.check_objective_agreement(200)
    elapsed = time.time() - t0
    ok = opt.ok and agree.ok and elapsed < 300.0
    _report("3 grid optimality + closed forms", ok, t0, f"{opt.detail}; {agree.detail}")
    assert opt.ok, opt.line()
    assert agree.ok, agree.line()
    assert elapsed < 300.0


def test_criterion_04_single_job_coincidence():
    t0 = time.time()
    res = verify.check_coincidence(1000)
    _report("4 sTWF/uTWF coincidence", res.ok, t0, res.detail)
    assert res.ok, res.line()


def test_criterion_05_empirical_strong_stability():
    t0 = time.time()
    policies = [
        "random", "jsq", "jsq2", "jiq", "lsq2", "wfie", "stwf", "utwf",
        "l-stwf", "l-utwf", "stwf-ts", "utwf-ts",
    ]
    worst = 0.0
    for policy in policies:
        eta = 0.1 if policy.startswith("l-") or policy.endswith("-ts") else 1.0
        for splittable in (True, False):
            cfg = make_config(
                n_servers=50, m_dispatchers=5, mu=0.5, rounds=100_000, policy=policy,
                rho=0.9, eta=eta, splittable=splittable, seed=401,
            )
            run_started = time.time()
            r = run_simulation(cfg)
            per_run = time.time() - run_started
            assert per_run < 60.0, f"{policy} took {per_run:.1f}s"
            assert np.isfinite(r.stability_avg)
            rel = abs(r.stability_second_half - r.stability_avg) / r.stability_avg
            worst = max(worst, rel)
            assert rel <= 0.20, f"{policy} splittable={splittable}: drift {rel:.3f}"
    _report("5 empirical strong stability", True, t0, f"24 runs, worst half-vs-full drift {worst:.3f}")


SPLIT_BASELINES = ("jsq", "jsq2", "jiq", "lsq2", "wfie")


def test_criterion_06_load_sweep_ordering():
    t0 = time.time()
    gaps = []
    for rho in (0.90, 0.95, 0.99):
        twf = _seed_mean(_sim("stwf", rho, True))
        for baseline in SPLIT_BASELINES:
            base = _seed_mean(_sim(baseline, rho, True))
            gaps.append((f"s rho={rho} {baseline}", base - twf))
            assert twf < base, f"splittable rho={rho}: stwf {twf:.4f} !< {baseline} {base:.4f}"
    twf = _seed_mean(_sim("utwf", 0.99, False))
    for baseline in SPLIT_BASELINES:
        base = _seed_mean(_sim(baseline, 0.99, False))
        gaps.append((f"u rho=0.99 {baseline}", base - twf))
        assert twf < base, f"unsplittable rho=0.99: utwf {twf:.4f} !< {baseline} {base:.4f}"
    tightest = min(gaps, key=lambda kv: kv[1])
    _report("6 mean-response ordering", True, t0, f"tightest margin {tightest[1]:.4f} at {tightest[0]}")


def test_criterion_07_tail_ordering_at_high_load():
    t0 = time.time()
    twf99 = _pooled_p99(_sim("stwf", 0.99, True))
    for baseline in SPLIT_BASELINES:
        base99 = _pooled_p99(_sim(baseline, 0.99, True))
        assert twf99 <= base99, f"splittable p99: stwf {twf99} > {baseline} {base99}"
    utwf99 = _pooled_p99(_sim("utwf", 0.99, False))
    for baseline in SPLIT_BASELINES:
        base99 = _pooled_p99(_sim(baseline, 0.99, False))
        assert utwf99 <= base99, f"unsplittable p99: utwf {utwf99} > {baseline} {base99}"
    _report("7 p99 tail ordering", True, t0, f"stwf p99={twf99}, utwf p99={utwf99}")


def test_criterion_08_eta_monotonicity():
    t0 = time.time()
    etas = (0.1, 0.25, 0.5, 1.0)
    means = [_seed_mean(_sim("l-utwf", 0.99, False, eta=eta)) for eta in etas]
    violations = 0
    for lo, hi in zip(means[1:], means[:-1]):
        if lo > hi:  # response time went up as eta increased
            assert (lo - hi) / hi <= 0.02, f"eta curve rose {100 * (lo - hi) / hi:.1f}%"
            violations += 1
    assert violations <= 1, f"{violations} adjacent violations"
    _report("8 eta monotonicity", True, t0, "means " + ", ".join(f"{x:.3f}" for x in means))


def test_criterion_09_timestamped_gossip_gains():
    t0 = time.time()
    for eta in (0.01, 0.05):
        ts99 = _pooled_p99(_sim("utwf-ts", 0.99, False, n=200, m=20, eta=eta))
        local99 = _pooled_p99(_sim("l-utwf", 0.99, False, n=200, m=20, eta=eta))
        assert ts99 <= local99, f"eta={eta}: utwf-ts p99 {ts99} > l-utwf p99 {local99}"
    local = _seed_mean(_sim("l-utwf", 0.99, False, n=200, m=20, eta=0.1))
    lsq = _seed_mean(_sim("lsq2", 0.99, False, n=200, m=20))
    assert local <= 1.25 * lsq, f"l-utwf at eta=0.1 not competitive: {local:.3f} vs lsq {lsq:.3f}"
    _report("9 timestamped gossip", True, t0, f"l-utwf {local:.2f} vs lsq {lsq:.2f} at eta=0.1")


def test_criterion_10_byte_determinism(tmp_path):
    t0 = time.time()
    cfg = tmp_path / "cfg"
    cfg.write_text(
        "n_servers = 20\nm_dispatchers = 4\nrho = 0.95\nmu = 0.5\nrounds = 3000\n"
        "policy = utwf-ts\neta = 0.2\nsplittable = false\nseed = 9090\n"
    )
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli_main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append(out)
    assert (outs[0] / "result.json").read_bytes() == (outs[1] / "result.json").read_bytes()
    assert (outs[0] / "ccdf.csv").read_bytes() == (outs[1] / "ccdf.csv").read_bytes()
    sweep = tmp_path / "sweep"
    sweep.write_text(
        "n_servers = 20\nm_dispatchers = 4\nrho = 0.9\nmu = 0.5\nrounds = 1000\npolicy = stwf\n"
        "sweep = load\nvalues = 0.8,0.9\npolicies = stwf,jsq\nseeds = 1,2\n"
    )
    for name in ("s1", "s2"):
        assert cli_main(["sweep", "--config", str(sweep), "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "s1" / "sweep.csv").read_bytes() == (tmp_path / "s2" / "sweep.csv").read_bytes()
    _report("10 byte determinism", True, t0)


def test_criterion_11_partition_oracle():
    t0 = time.time()
    res = verify.check_partition(100)
    _report("11 partition oracle", res.ok, t0, res.detail)
    assert res.ok, res.line()

"""Benchmark the compiled kernel against the pure numpy round loop.

Run as ``python -m tidalwf.bench``. Both backends execute the same
configurations; besides timing, the harness asserts that their
trajectories agree exactly (they share substreams and draw order).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from .config import make_config
from .engine import numba_available, simulate_raw

CASES = (
    ("stwf  complete  (50,5)", dict(n_servers=50, m_dispatchers=5, policy="stwf", eta=1.0)),
    ("utwf  complete  (50,5)", dict(n_servers=50, m_dispatchers=5, policy="utwf", eta=1.0, splittable=False)),
    ("jsq   complete  (50,5)", dict(n_servers=50, m_dispatchers=5, policy="jsq", eta=1.0)),
    ("l-utwf eta=0.25 (50,5)", dict(n_servers=50, m_dispatchers=5, policy="l-utwf", eta=0.25, splittable=False)),
    ("utwf-ts eta=0.1 (50,5)", dict(n_servers=50, m_dispatchers=5, policy="utwf-ts", eta=0.1, splittable=False)),
)


def _trajectories_equal(a, b) -> bool:
    for x, y in zip(a, b):
        if isinstance(x, np.ndarray):
            size = max(x.shape[0], y.shape[0])
            xa = np.zeros(size, dtype=np.int64)
            ya = np.zeros(size, dtype=np.int64)
            xa[: x.shape[0]] = x
            ya[: y.shape[0]] = y
            if not np.array_equal(xa, ya):
                return False
        elif int(x) != int(y):
            return False
    return True


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="compare engine backends")
    parser.add_argument("--rounds", type=int, default=20000)
    parser.add_argument("--rho", type=float, default=0.95)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)

    if not numba_available():
        print("numba is not available; nothing to compare (numpy backend only)")
        return 0

    # Absorb compilation (cached after the first ever run).
    warm = make_config(n_servers=4, m_dispatchers=2, mu=0.5, rounds=50, policy="stwf", rho=0.5, seed=1)
    simulate_raw(warm, backend="numba")

    print(f"rounds={args.rounds} rho={args.rho} seed={args.seed}")
    print(f"{'case':<26}{'numba':>10}{'numpy':>10}{'speedup':>9}  match")
    for label, kw in CASES:
        cfg = make_config(
            mu=0.5, rounds=args.rounds, rho=args.rho, seed=args.seed, warmup=args.rounds // 10, **kw
        )
        t0 = time.perf_counter()
        raw_nb, _ = simulate_raw(cfg, backend="numba")
        t_nb = time.perf_counter() - t0
        t0 = time.perf_counter()
        raw_np, _ = simulate_raw(cfg, backend="numpy")
        t_np = time.perf_counter() - t0
        same = _trajectories_equal(raw_nb, raw_np)
        print(f"{label:<26}{t_nb:>9.2f}s{t_np:>9.2f}s{t_np / t_nb:>8.1f}x  {'yes' if same else 'NO'}")
        if not same:
            return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

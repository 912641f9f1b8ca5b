"""Experiment command line.

Subcommands:
  run      one simulation from a config file -> result.json + ccdf.csv
  sweep    a (policy x value x seed) grid from a sweep file -> sweep.csv
  compare  several policies on one config with paired seeds -> compare.csv
  verify   the oracle and invariant suites -> pass/fail lines

Exit codes: 0 success, 1 verification failure, 2 configuration error.
All outputs are plain data (JSON/CSV) and deterministic for a given config
and seed; plotting is left to external tools.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, SweepSpec, SystemConfig, load_config, load_sweep, with_load
from .engine import ExperimentResult, run_simulation
from .policies import parse_policy

SWEEP_SCHEMA = "# tidalwf-sweep-csv v1"
CCDF_SCHEMA = "# tidalwf-ccdf-csv v1"
SWEEP_HEADER = "policy,param,value,seed,mean_response,p50,p90,p95,p99,p999,stability_avg"


def _fmt(x) -> str:
    if x is None:
        return "nan"
    return repr(float(x)) if isinstance(x, float) else str(x)


def write_result_files(result: ExperimentResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(result.to_dict(), sort_keys=True, indent=2) + "\n"
    (out_dir / "result.json").write_text(payload)
    lines = [CCDF_SCHEMA, "tau,fraction"]
    for tau, frac in result.ccdf:
        lines.append(f"{tau},{_fmt(float(frac))}")
    (out_dir / "ccdf.csv").write_text("\n".join(lines) + "\n")


def cmd_run(args) -> int:
    config = load_config(args.config)
    result = run_simulation(config)
    write_result_files(result, Path(args.out))
    print(f"wrote {Path(args.out) / 'result.json'} and ccdf.csv")
    return 0


def _run_cell(cfg_and_param: tuple[SystemConfig, str, float]) -> str:
    cfg, param, value = cfg_and_param
    r = run_simulation(cfg)
    p = r.percentiles
    fields = (
        cfg.policy.name,
        param,
        _fmt(float(value)),
        str(cfg.seed),
        _fmt(r.mean_response),
        _fmt(p["p50"]),
        _fmt(p["p90"]),
        _fmt(p["p95"]),
        _fmt(p["p99"]),
        _fmt(p["p999"]),
        _fmt(r.stability_avg),
    )
    return ",".join(fields)


def run_sweep(spec: SweepSpec, out_path: Path, threads: int = 1) -> list[str]:
    jobs = []
    for policy in spec.policies:
        for value in spec.values:
            for seed in spec.seeds:
                cfg = replace(spec.base, policy=parse_policy(policy), seed=int(seed))
                cfg = with_load(cfg, float(value)) if spec.param == "load" else replace(cfg, eta=float(value))
                jobs.append((cfg, spec.param, float(value)))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(job) for job in jobs]
    rows.sort()
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join([SWEEP_SCHEMA, SWEEP_HEADER] + rows) + "\n")
    return rows


def cmd_sweep(args) -> int:
    spec = load_sweep(
        args.config,
        param=args.param,
        values=[float(v) for v in args.values.split(",")] if args.values else None,
        policies=[p.strip() for p in args.policies.split(",")] if args.policies else None,
        seeds=[int(s) for s in args.seeds.split(",")] if args.seeds else None,
    )
    if spec.param == "eta":
        for v in spec.values:
            if not 0.0 < v <= 1.0:
                raise ConfigError("values: eta values must lie in (0, 1]")
    out = Path(args.out) / "sweep.csv"
    rows = run_sweep(spec, out, threads=args.threads)
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


def cmd_compare(args) -> int:
    base = load_config(args.config)
    policies = [p.strip() for p in args.policies.split(",")] if args.policies else [base.policy.name]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [base.seed]
    spec = SweepSpec(
        base=base,
        param="load",
        values=(base.target_load,),
        policies=tuple(policies),
        seeds=tuple(seeds),
    )
    out = Path(args.out) / "compare.csv"
    rows = run_sweep(spec, out, threads=args.threads)
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_suite

    results = run_suite(args.level)
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.ok]
    if args.out:
        report = {
            "level": args.level,
            "passed": len(results) - len(failed),
            "failed": len(failed),
            "checks": [
                {"name": r.name, "ok": r.ok, "detail": r.detail, "instance": r.instance}
                for r in results
            ],
        }
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "verify.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tidalwf", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation")
    p_run.add_argument("--config", required=True, help="path to a config file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep")
    p_sweep.add_argument("--config", required=True, help="path to a sweep file")
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.add_argument("--param", choices=("load", "eta"), help="swept parameter (overrides file)")
    p_sweep.add_argument("--values", help="comma-separated values (overrides file)")
    p_sweep.add_argument("--policies", help="comma-separated policy ids (overrides file)")
    p_sweep.add_argument("--seeds", help="comma-separated seeds (overrides file)")
    p_sweep.add_argument("--threads", type=int, default=1, help="parallel worker processes")
    p_sweep.set_defaults(func=cmd_sweep)

    p_cmp = sub.add_parser("compare", help="compare policies on one config with paired seeds")
    p_cmp.add_argument("--config", required=True)
    p_cmp.add_argument("--out", required=True)
    p_cmp.add_argument("--policies", help="comma-separated policy ids")
    p_cmp.add_argument("--seeds", help="comma-separated seeds")
    p_cmp.add_argument("--threads", type=int, default=1)
    p_cmp.set_defaults(func=cmd_compare)

    p_ver = sub.add_parser("verify", help="run the oracle and invariant suites")
    p_ver.add_argument("--level", choices=("fast", "full"), default="fast")
    p_ver.add_argument("--out", help="directory for a machine-readable verify.json")
    p_ver.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: cannot read {exc.filename}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

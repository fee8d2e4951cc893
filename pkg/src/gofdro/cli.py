"""Command-line batch harness.

Subcommands
-----------
gen-data    draw a dataset from a generator spec and write it as CSV
thresholds  simulate a test threshold and cache it in a CSV table
solve       one robust/baseline solve on a dataset or a fresh draw
replicate   seeded replication study over the configured method grid
sweep       convergence sweep over an increasing list of sample sizes
pod         price-of-data estimates (resampling or threshold-difference)

Exit codes: 0 success, 2 configuration error, 3 solver limit hit in at
least one replicate.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ._validation import ConfigurationError, DomainError
from .univariate import ClosedFormInapplicable
from .experiments import (
    ExperimentConfig,
    parse_config,
    run_convergence_sweep,
    run_pod_study,
    run_replication_study,
)
from .gof import ThresholdCache, mc_threshold_edf
from .samples import GeneratorSpec, SampleSet, sample
from .solution import write_result_rows

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER_LIMIT = 3


def _load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(json.load(fh))


def _cmd_gen_data(args) -> int:
    if args.generator_json:
        with open(args.generator_json) as fh:
            gen = GeneratorSpec.from_json(fh.read())
    else:
        params = json.loads(args.params) if args.params else {}
        gen = GeneratorSpec(args.family, params, args.seed)
    data = sample(gen, args.n)
    data.to_csv(args.out)
    print(f"wrote {data.N} x {data.d} observations to {args.out}")
    return EXIT_OK


def _cmd_thresholds(args) -> int:
    cache = ThresholdCache(args.cache) if args.cache else None
    if cache is not None:
        hit = cache.get(args.kind, args.n, args.alpha, "monte-carlo", args.reps, args.seed)
        if hit is not None:
            print(f"{args.kind} N={args.n} alpha={args.alpha}: {hit} (cached)")
            return EXIT_OK
    thr = mc_threshold_edf(args.kind, args.n, args.alpha, args.reps, args.seed)
    if cache is not None:
        cache.put(args.kind, args.n, args.alpha, "monte-carlo", args.reps, args.seed, thr.value)
        cache.save()
    print(f"{args.kind} N={args.n} alpha={args.alpha}: {thr.value}")
    return EXIT_OK


def _cmd_replicate(args) -> int:
    cfg = _load_config(args.config)
    rows, limit = run_replication_study(cfg)
    out = args.out or cfg.output or "results.csv"
    write_result_rows(out, rows)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_SOLVER_LIMIT if limit else EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    rows, limit = run_convergence_sweep(cfg)
    out = args.out or cfg.output or "sweep.csv"
    write_result_rows(out, rows)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_SOLVER_LIMIT if limit else EXIT_OK


def _cmd_solve(args) -> int:
    cfg = _load_config(args.config)
    if args.data:
        data = SampleSet.read_csv(args.data)
        cfg = ExperimentConfig(
            generator=cfg.generator, cost=cfg.cost, support=cfg.support,
            methods=cfg.methods, n_list=[data.N], replications=1,
            seed=cfg.seed, output=cfg.output, timing=cfg.timing, raw=cfg.raw,
        )
        from .experiments import _MethodRunner, _row, _true_cost

        rows = []
        limit = False
        for spec in cfg.methods:
            runner = _MethodRunner(spec, cfg)
            runner.prepare(data.N)
            sol = runner.solve(data, cfg.seed)
            z = _true_cost(cfg, sol.x) if sol.is_optimal and not args.no_oracle else None
            limit |= sol.status == "numerical-limit"
            rows.append(_row(cfg, spec["name"], data.N, 0, sol, z, None))
    else:
        rows, limit = run_replication_study(cfg)
    out = args.out or cfg.output or "solve.csv"
    write_result_rows(out, rows)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_SOLVER_LIMIT if limit else EXIT_OK


def _cmd_pod(args) -> int:
    cfg = _load_config(args.config)
    rows, limit = run_pod_study(cfg, args.method, args.m)
    out = args.out or cfg.output or "pod.csv"
    write_result_rows(out, rows)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_SOLVER_LIMIT if limit else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gofdro", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="draw a dataset and write CSV")
    g.add_argument("--family", choices=["truncated-normal", "gumbel", "mixture", "pareto-factor"])
    g.add_argument("--params", help="JSON object of family parameters")
    g.add_argument("--generator-json", help="file with a full generator spec")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=_cmd_gen_data)

    t = sub.add_parser("thresholds", help="simulate and cache a test threshold")
    t.add_argument("--kind", required=True,
                   choices=["ks", "kuiper", "cvm", "watson", "ad"])
    t.add_argument("--n", type=int, required=True)
    t.add_argument("--alpha", type=float, required=True)
    t.add_argument("--reps", type=int, default=100_000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--cache")
    t.set_defaults(fn=_cmd_thresholds)

    s = sub.add_parser("solve", help="solve the configured methods once")
    s.add_argument("--config", required=True)
    s.add_argument("--data", help="CSV dataset; otherwise draws from the generator")
    s.add_argument("--no-oracle", action="store_true",
                   help="skip the true-cost oracle column")
    s.add_argument("--out")
    s.set_defaults(fn=_cmd_solve)

    r = sub.add_parser("replicate", help="run a replication study")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.set_defaults(fn=_cmd_replicate)

    w = sub.add_parser("sweep", help="run a convergence sweep over N")
    w.add_argument("--config", required=True)
    w.add_argument("--out")
    w.set_defaults(fn=_cmd_sweep)

    d = sub.add_parser("pod", help="estimate the price of data")
    d.add_argument("--config", required=True)
    d.add_argument("--method", choices=["resample", "ks-approx"], default="resample")
    d.add_argument("--m", type=int, default=10**9,
                   help="resample subsample size (capped at N)")
    d.add_argument("--out")
    d.set_defaults(fn=_cmd_pod)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigurationError, DomainError, ClosedFormInapplicable,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

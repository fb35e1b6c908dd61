"""``bench`` command line entry point.

Exit codes: 0 success, 1 validation error (or failed diagnostics), 2 IO error.
"""

import argparse
import csv
import sys
from dataclasses import asdict

from . import bench, diagnostics
from .estimators import LambdaRule


def _run(args):
    with open(args.config) as fh:
        text = fh.read()
    cfg = bench.parse_config(text)
    records, aggs = bench.run_sweep(cfg, threads=args.threads)
    out = args.out or cfg.output_path
    bench.write_csv(records, aggs, out)
    print(f"wrote {len(records)} records to {out}.raw.csv and {out}.agg.csv")
    return 0


def _single(args):
    cfg = bench.ExperimentConfig(
        sweep_axis="T",
        sweep_values=[args.T],
        d=args.d, r=args.r, m=args.m, T=args.T, sigma=args.sigma,
        estimators=[args.estimator],
        n_seeds=1,
        base_seed=args.base_seed,
        lambda_rule=LambdaRule(),
        feature_dist=args.feature_dist,
        param_scheme=args.param_scheme,
        max_iters=args.max_iters,
        transfer=args.transfer,
        record_runtime=True,
    ).validate()
    rec = bench.run_cell(cfg, args.T, args.estimator, args.seed)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(bench.RAW_HEADER)
    row = asdict(rec)
    w.writerow([bench._fmt(row[h]) for h in bench.RAW_HEADER])
    return 0


def _check(args):
    results = diagnostics.run_all(seed=args.seed)
    for res in results:
        print(res)
    return 0 if all(r.passed for r in results) else 1


class _Parser(argparse.ArgumentParser):
    # bad arguments are validation errors (exit 1); 2 is reserved for IO
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="bench", description="Multi-task low-rank regression experiments")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a sweep described by a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="output prefix (overrides output_path)")
    run.add_argument("--threads", type=int, default=1)
    run.set_defaults(func=_run)

    single = sub.add_parser("single", help="fit one estimator on one generated dataset")
    single.add_argument("--estimator", required=True, choices=bench.ESTIMATORS)
    single.add_argument("--d", type=int, default=100)
    single.add_argument("--r", type=int, default=5)
    single.add_argument("--m", type=int, default=10)
    single.add_argument("--T", type=int, default=800)
    single.add_argument("--sigma", type=float, default=1.0)
    single.add_argument("--seed", type=int, default=0)
    single.add_argument("--base-seed", type=int, default=0)
    single.add_argument("--feature-dist", default="gaussian")
    single.add_argument("--param-scheme", default="gaussian")
    single.add_argument("--max-iters", type=int, default=5000)
    single.add_argument("--transfer", action="store_true")
    single.set_defaults(func=_single)

    check = sub.add_parser("check", help="run the random-design diagnostic suite")
    check.add_argument("--seed", type=int, default=0)
    check.set_defaults(func=_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``pigpucb {run,verify-lemmas,plot,bench-suite}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import (
    DEFAULT_HORIZONS,
    ExperimentConfig,
    emit_plots,
    format_report,
    load_config,
    load_runs,
    parse_seeds,
    run_experiment,
    verify_lemmas,
)
from .testbed import BENCHMARKS


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="key = value experiment file; flags override it")
    p.add_argument("--algo", help="pi-gp-ucb, igp-ucb, uniform (comma separated for several)")
    p.add_argument("--problem", help="'synthetic' or a benchmark name")
    p.add_argument("--dim", type=int)
    p.add_argument("--nu", type=float)
    p.add_argument("--ell", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--seeds", type=parse_seeds, help="e.g. 0-4 or 0,3,7")
    p.add_argument("--delta", type=float)
    p.add_argument("--alpha", type=float, help="regularisation (experiments default to 1)")
    p.add_argument("--rkhs-norm", type=float, dest="rkhs_norm",
                   help="B passed to the algorithms (default: exact norm, or 1 for benchmarks)")
    p.add_argument("--noise", type=float, help="half-width of the uniform observation noise")
    p.add_argument("--grid", type=int, help="grid points per axis")
    p.add_argument("--initial-cover", choices=("grid", "root"), dest="initial_cover")
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", type=Path, help="output directory (default $PIGPUCB_OUT or ./results)")
    p.add_argument("--name", help="experiment name (subdirectory of --out)")
    p.add_argument("--full-argmax", action="store_true", default=None, dest="full_argmax",
                   help="recompute every posterior each step instead of using cached values")


_KEYS = ("problem", "dim", "nu", "ell", "horizon", "seeds", "delta", "alpha", "rkhs_norm",
         "noise", "grid", "initial_cover", "jobs", "out", "name", "full_argmax")


def build_configs(args, default_name: str | None = None) -> list:
    values = load_config(args.config) if args.config else {}
    for key in _KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if default_name and "name" not in values:
        values["name"] = default_name.format(dim=values.get("dim", 1))
    algos = args.algo.split(",") if args.algo else [values.pop("algorithm", "pi-gp-ucb")]
    values.pop("algorithm", None)
    return [ExperimentConfig(algorithm=a.strip(), **values) for a in algos]


def _print_summary(cfg: ExperimentConfig, summary: dict):
    frac = summary["regret_fraction"]
    reg = summary["cumulative_regret"]
    frac_txt = "undefined" if frac["median"] is None or not summary["regret_fraction_defined"] \
        else f"{frac['median']:.3f} [{frac['lo']:.3f}, {frac['hi']:.3f}]"
    wc = summary["wall_clock_total_s"]["median"]
    print(f"{cfg.algorithm:>10}  R_T median {reg['median']:.2f} [{reg['lo']:.2f}, {reg['hi']:.2f}]  "
          f"fraction of uniform {frac_txt}  runtime {wc:.2f}s  -> {cfg.run_dir}")
    if summary["failures"]:
        print(f"  failed seeds: {summary['failures']}", file=sys.stderr)


def cmd_run(args) -> int:
    cfgs = build_configs(args)
    for cfg in cfgs:
        _print_summary(cfg, run_experiment(cfg))
    if len(cfgs) > 1:
        runs = load_runs([c.run_dir for c in cfgs])
        csv_path, png = emit_plots(runs, cfgs[0].out / cfgs[0].name, title=cfgs[0].name)
        print(f"plots: {png}")
    return 0


def cmd_verify(args) -> int:
    cfg = build_configs(args, default_name="lemmas-d{dim}")[0]
    horizons = args.horizons or list(DEFAULT_HORIZONS)
    report = verify_lemmas(cfg, horizons=horizons)
    print("\n".join(format_report(report)))
    return 0


def cmd_plot(args) -> int:
    runs = load_runs(args.run_dirs)
    if not runs:
        print("no traces found", file=sys.stderr)
        return 1
    csv_path, png = emit_plots(runs, args.output, window=args.window)
    print(f"{csv_path}\n{png}")
    return 0


def cmd_bench(args) -> int:
    base = build_configs(args)[0]
    names = args.benchmarks.split(",") if args.benchmarks else list(BENCHMARKS)
    algos = args.algo.split(",") if args.algo else ["pi-gp-ucb", "igp-ucb"]
    table = {}
    for name in names:
        dirs = []
        for algo in algos:
            cfg = replace(base, algorithm=algo, problem=name, dim=2, name=f"bench-{name}-T{base.horizon}")
            summary = run_experiment(cfg)
            _print_summary(cfg, summary)
            table.setdefault(name, {})[algo] = summary["cumulative_regret"]
            dirs.append(cfg.run_dir)
        emit_plots(load_runs(dirs), base.out / f"bench-{name}-T{base.horizon}", title=name)
    (base.out / f"bench_suite_T{base.horizon}.json").parent.mkdir(parents=True, exist_ok=True)
    (base.out / f"bench_suite_T{base.horizon}.json").write_text(json.dumps(table, indent=2))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pigpucb", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run seeded experiments and write traces and summaries")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify-lemmas", help="empirical scaling checks over several horizons")
    _common(p)
    p.add_argument("--horizons", type=parse_seeds, help="e.g. 500,1000,2000,4000")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="plot traces from one or more run directories")
    p.add_argument("run_dirs", nargs="+", type=Path)
    p.add_argument("--output", type=Path, default=Path("."))
    p.add_argument("--window", type=int, default=200)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("bench-suite", help="both UCB algorithms on the four 2-d benchmarks")
    _common(p)
    p.add_argument("--benchmarks", help="comma separated subset of " + ",".join(BENCHMARKS))
    p.set_defaults(func=cmd_bench)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

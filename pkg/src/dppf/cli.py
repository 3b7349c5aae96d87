"""Command-line entry point for the benchmark runners.

Subcommands mirror the three experiment kinds (simulate, coverage,
logistic) plus validate-config for checking a file without running
anything.  Each runner takes either --config FILE or a built-in --preset;
--seed, --workers, and --out override the corresponding config values.

Exit codes: 0 success, 2 bad config or usage, 3 experiment infeasible
(every sampler run stalled at the attempt cap).
"""

import argparse
import sys
from dataclasses import replace

from .engine import StallError
from .harness import (
    ConfigError,
    InfeasibleExperimentError,
    load_config,
    parse_config,
    preset_text,
    run_coverage,
    run_experiment,
    run_logistic_analysis,
)

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dppf",
        description="Benchmark harness for the private particle filter.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_runner(name, help_text):
        cmd = sub.add_parser(name, help=help_text)
        source = cmd.add_mutually_exclusive_group()
        source.add_argument("--config", metavar="FILE",
                            help="experiment config file")
        source.add_argument("--preset", choices=("desk", "paper"),
                            help="built-in config (default: desk)")
        cmd.add_argument("--seed", type=int, metavar="N",
                         help="override the master seed")
        cmd.add_argument("--workers", type=int, metavar="N",
                         help="override the worker count (0 = all cores)")
        cmd.add_argument("--out", metavar="DIR",
                         help="override the output directory")
        return cmd

    add_runner("simulate",
               "replicate sweep over a budget-by-sample-size grid")
    add_runner("coverage",
               "interval coverage against a fixed release")
    add_runner("logistic",
               "private logistic regression on census-like records")

    check = sub.add_parser("validate-config",
                           help="parse and validate a config file")
    check.add_argument("--config", metavar="FILE", required=True,
                       help="experiment config file")
    return parser


def _resolve_config(args):
    if args.command == "validate-config":
        return load_config(args.config)
    if args.config is not None:
        config = load_config(args.config, expected_kind=args.command)
    else:
        config = parse_config(preset_text(args.command,
                                          args.preset or "desk"),
                              expected_kind=args.command)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["out_dir"] = args.out
    if overrides:
        try:
            config = replace(config, **overrides)
        except ConfigError:
            raise
        except ValueError as err:
            raise ConfigError(str(err)) from None
    return config


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _resolve_config(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    if args.command == "validate-config":
        print(f"ok: {config.kind} experiment, model {config.model}, "
              f"sampler {config.sampler}, "
              f"{len(config.eps_grid)} budget(s) x "
              f"{len(config.n_grid)} record count(s), "
              f"{config.replicates} replicate(s)")
        return 0

    try:
        if args.command == "simulate":
            rows, _ = run_experiment(config)
            stalled = sum(row.status == "stalled" for row in rows)
            print(f"wrote {len(rows)} result rows "
                  f"({stalled} stalled) to {config.out_dir}")
        elif args.command == "coverage":
            table, truth = run_coverage(config)
            print(f"reference value {truth:.6g}; wrote "
                  f"{len(table)} coverage cells to {config.out_dir}")
            for entry in table:
                print(f"  N={entry['n_particles']}: "
                      f"coverage {entry['coverage']:.3f}, "
                      f"mean width {entry['mean_width']:.4g}")
        else:
            rows, _ = run_logistic_analysis(config)
            stalled = sum(row.status == "stalled" for row in rows)
            print(f"wrote {len(rows)} logistic rows "
                  f"({stalled} stalled) to {config.out_dir}")
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (InfeasibleExperimentError, StallError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

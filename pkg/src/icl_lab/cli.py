"""Command-line entry point.

    icl-lab <experiment> [--config file] [--d 400 --m 200 --n 800
            --B 50:2000:50 --rho 0.1 --r 0.01 --eta 0.2 --k 3
            --trials 10 --seed 42 --out results.csv]

Grid-valued flags (--n, --B, --k) accept `lo:hi:step` or comma lists.
Exit codes: 0 success, 2 config error, 3 divergence aborted a non-sweep run.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, DivergenceError, PoleError
from .harness import (EXPERIMENTS, build_config, parse_config_file,
                      run_experiment, write_csv)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icl-lab",
        description="Post-training experiments for the linear-attention "
                    "in-context regression pipeline.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="flat key = value config file")
    for name in ("d", "m", "gd-steps", "trials", "seed", "workers"):
        parser.add_argument(f"--{name}", type=int, default=None)
    for name in ("n", "B", "k"):
        parser.add_argument(f"--{name}", type=str, default=None,
                            help="grid: lo:hi:step or comma list")
    for name in ("rho", "r", "eta", "gamma-step"):
        parser.add_argument(f"--{name}", type=float, default=None)
    parser.add_argument("--out", type=str, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        file_values = parse_config_file(args.config) if args.config else {}
        overrides = {k: v for k, v in vars(args).items()
                     if k not in ("experiment", "config")}
        cfg = build_config(args.experiment, file_values, overrides)
        rows = run_experiment(cfg)
    except (ConfigError, PoleError, FileNotFoundError) as exc:
        if isinstance(exc, ConfigError):
            for err in exc.errors:
                print(f"config error: {err}", file=sys.stderr)
        else:
            print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return 3
    write_csv(rows, cfg.experiment, cfg.out)
    print(f"{len(rows)} rows -> {cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

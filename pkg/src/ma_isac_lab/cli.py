"""Command-line front end: one experiment kind per invocation, CSV out.

Exit codes: 0 on success, 1 when the configuration (file, flags, or usage)
is invalid, 2 when the run itself fails.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import load_config
from .errors import ConfigError
from .experiments import EXPERIMENT_KINDS, emit_csv, run_experiment

__all__ = ["main", "build_parser"]

# which Monte Carlo knob --trials overrides, per experiment kind
_TRIALS_FIELD = {
    "mse-vs-power": "mse_trials",
    "region-width": "sweep_trials",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ma-isac-lab",
        description="Run one placement/beamforming experiment and write its records as CSV.",
    )
    parser.add_argument("kind", choices=EXPERIMENT_KINDS, help="experiment kind")
    parser.add_argument("--config", required=True, help="flat key=value config file")
    parser.add_argument("--out", required=True, help="output CSV path")
    parser.add_argument("--seed", type=int, default=None, help="root seed (u64)")
    parser.add_argument(
        "--trials", type=int, default=None,
        help="Monte Carlo trials per point (overrides the kind's trial knob)",
    )
    parser.add_argument(
        "--threads", type=int, default=None,
        help="worker processes (MA_ISAC_THREADS overrides)",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; a bad
        # command line is a configuration problem here
        return 0 if exc.code == 0 else 1

    try:
        config = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            if not 0 <= args.seed < (1 << 64):
                raise ConfigError(f"--seed must fit in u64, got {args.seed}")
            overrides["seed"] = args.seed
        if args.trials is not None:
            if args.trials < 1:
                raise ConfigError(f"--trials must be >= 1, got {args.trials}")
            overrides[_TRIALS_FIELD.get(args.kind, "estimate_trials")] = args.trials
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError(f"--threads must be >= 1, got {args.threads}")
            overrides["threads"] = args.threads
        if overrides:
            config = replace(config, **overrides)
    except ConfigError as exc:
        print(f"ma-isac-lab: config error: {exc}", file=sys.stderr)
        return 1

    try:
        records = run_experiment(args.kind, config)
        emit_csv(records, args.out)
    except ConfigError as exc:
        print(f"ma-isac-lab: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"ma-isac-lab: run failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

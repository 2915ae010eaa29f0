"""Command-line entry point: ``subperc <experiment> --config <path>``.

Exit codes: 0 success, 2 config error, 3 precondition or bracketing
failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import sys

from .config import EXPERIMENTS, load_config
from .errors import BracketingError, ConfigError, PreconditionError
from .experiments import run_experiment
from .parallel import default_jobs

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_IO = 0, 2, 3, 4


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("--jobs must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subperc", description="Run a percolation experiment from a config file.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--seed", type=_u64, default=None, help="override master_seed")
    p.add_argument("--out", default=None, help="fresh output directory (overrides output_dir)")
    p.add_argument("--jobs", type=_positive, default=None, help="worker processes (default: all cores)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, {"experiment": args.experiment, "master_seed": args.seed})
    except ConfigError as exc:
        print(f"subperc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    jobs = args.jobs or default_jobs()
    try:
        run = run_experiment(config, args.out, jobs)
    except BracketingError as exc:
        print(
            f"subperc: bracketing failed: {exc} (fraction at lo={exc.lo_fraction}, hi={exc.hi_fraction})",
            file=sys.stderr,
        )
        return EXIT_PRECONDITION
    except PreconditionError as exc:
        print(f"subperc: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"subperc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(run.outputs)} files to {run.out}")
    for key, value in sorted(run.summary.items()):
        print(f"  {key}: {value}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

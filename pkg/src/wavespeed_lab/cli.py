"""Command-line entry point.

Exit codes: 0 success, 1 validation/configuration, 2 numeric failure,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import WavespeedError
from .harness import emit_outputs, load_config, run_experiment


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="wavespeed-lab",
        description="average wave speeds under oscillating temporal forcing")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the configured experiment")
    run.add_argument("config")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--jobs", type=int, default=None,
                     help="worker processes (default: logical cores, "
                          "or WAVESPEED_LAB_JOBS)")
    run.add_argument("--no-plots", action="store_true")

    lemmas = sub.add_parser("verify-lemmas",
                            help="residual and sandwich checks only")
    lemmas.add_argument("config")
    lemmas.add_argument("--out", default=None)

    curve = sub.add_parser("curve", help="frozen-speed curve only")
    curve.add_argument("config")
    curve.add_argument("--out", default=None)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config, out_dir=args.out)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 3
    except WavespeedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:            # malformed TOML
        print(f"error: bad config: {exc}", file=sys.stderr)
        return 1

    if args.command == "verify-lemmas":
        config = _with_kind(config, "lemma-check")
    elif args.command == "curve":
        config = _with_kind(config, "frozen-curve")

    record = run_experiment(config, jobs=getattr(args, "jobs", 1))
    try:
        emit_outputs(record, plots=not getattr(args, "no_plots", False))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    for line in record.failures:
        print(f"stage failed: {line}", file=sys.stderr)
    if record.failures:
        return 2
    print(json.dumps({"out_dir": record.config.out_dir,
                      "files": sorted(record.files)}, indent=2))
    return 0


def _with_kind(config, kind):
    from dataclasses import replace
    return replace(config, kind=kind)


if __name__ == "__main__":
    sys.exit(main())

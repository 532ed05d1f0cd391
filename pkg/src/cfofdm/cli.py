"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 validation failure,
3 runtime numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import ConfigError, apply_overrides, load_config
from .harness import (
    dump_geometry_csv,
    records_to_csv,
    run_experiment,
    run_fig2,
    run_fig3,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--out", default=None, help="output CSV path (default stdout)")
    p.add_argument("--deterministic", action="store_true",
                   help="sequential execution with fixed merge order")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for Monte Carlo trials")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim",
        description="Uplink cell-free massive MIMO OFDM phase-noise simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("config", help="flat key = value configuration file")
    _add_run_options(p_run)

    for fig in ("fig2", "fig3"):
        p_fig = sub.add_parser(fig, help="run the %s preset" % fig)
        p_fig.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                           help="configuration overrides")
        _add_run_options(p_fig)

    p_val = sub.add_parser("validate", help="run the model validation suite")
    p_val.add_argument("--n", type=int, default=64, help="transform size for checks")

    p_dump = sub.add_parser("dump-geometry", help="write node coordinates as CSV")
    p_dump.add_argument("config", help="configuration file")
    p_dump.add_argument("--seed", type=int, default=None, help="override master_seed")
    p_dump.add_argument("--out", default=None, help="output CSV path (default stdout)")

    return parser


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg = replace(cfg, master_seed=args.seed)
            cfg.validate()
            records = run_experiment(cfg, threads=args.threads,
                                     deterministic=args.deterministic, progress=True)
            _emit(records_to_csv(records), args.out)
            return EXIT_OK

        if args.command in ("fig2", "fig3"):
            from .config import fig2_config, fig3_config

            base = fig2_config() if args.command == "fig2" else replace(
                fig3_config(10), name="fig3")
            cfg = apply_overrides(base, args.overrides)
            if args.seed is not None:
                cfg = replace(cfg, master_seed=args.seed)
            runner = run_fig2 if args.command == "fig2" else run_fig3
            records = runner(cfg, threads=args.threads,
                             deterministic=args.deterministic, progress=True)
            _emit(records_to_csv(records), args.out)
            return EXIT_OK

        if args.command == "validate":
            from .validate import run_validation

            ok, lines = run_validation(n=args.n)
            for line in lines:
                print(line)
            return EXIT_OK if ok else EXIT_VALIDATION

        if args.command == "dump-geometry":
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg = replace(cfg, master_seed=args.seed)
            _emit(dump_geometry_csv(cfg), args.out)
            return EXIT_OK

    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print("runtime error: %s" % exc, file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

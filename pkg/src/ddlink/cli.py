"""Command-line entry point.

Subcommands mirror the experiment kinds: ``equiv``, ``papr``, ``ber``,
``sumse``, ``sensing``.  Each takes ``--config <path>`` plus optional
``--seed``, ``--out``, and ``--jobs`` overrides.

Exit status: 0 success, 1 config/validation error, 2 runtime invariant
violation.
"""

from __future__ import annotations

import argparse
import sys

from .harness import ConfigError, InvariantViolation, parse_config, run

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddlink",
        description="Delay-Doppler link-level simulation harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind, help_text in (
        ("equiv", "modulation-path equivalence check"),
        ("papr", "PAPR CCDF comparison, OTFS vs per-symbol-CP OFDM"),
        ("ber", "Monte-Carlo BER sweep"),
        ("sumse", "multiuser downlink sum spectral efficiency sweep"),
        ("sensing", "delay-Doppler estimation NMSE vs CRB sweep"),
    ):
        p = sub.add_parser(kind, help=help_text)
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=".", help="output directory for the result CSV")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for trials")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if cfg.kind != args.command:
            raise ConfigError(
                f"config declares experiment {cfg.kind!r} but the "
                f"{args.command!r} subcommand was invoked")
        table = run(cfg, out_dir=args.out, seed=args.seed, jobs=args.jobs)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    seed = args.seed if args.seed is not None else cfg.seed
    print(f"wrote {table.experiment}-{seed}.csv ({len(table.rows)} rows) to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``fincorr <command> [--config PATH] [--out DIR] ...``.

Exit codes: 0 success, 1 input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, config, pipeline
from .errors import InputError, NumericalError

log = logging.getLogger("fincorr")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--out", type=Path, help="output directory (overrides config)")
    common.add_argument("--seed", type=int, help="master seed, unsigned 64-bit (overrides config)")
    common.add_argument("--period", help="restrict to one named period (or 'full')")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fincorr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fincorr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="load and align prices, write the panel")
    sub.add_parser("rmt", parents=[common], help="correlation spectra, MP comparison, sliding windows")
    sub.add_parser("network", parents=[common], help="threshold networks and MST per period")
    sub.add_parser("mfdfa", parents=[common], help="MF-DFA with shuffled/IAAFT baselines and BMFM fit")
    sub.add_parser("report", parents=[common], help="render figures from existing outputs")
    demo = sub.add_parser("demo", parents=[common], help="synthetic panel through the full pipeline")
    demo.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    return parser


def _resolve(args) -> tuple[config.RunConfig, Path]:
    cfg = config.load(args.config) if args.config else config.RunConfig()
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise InputError("--seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    out = args.out if args.out is not None else Path(cfg.out)
    if args.config and args.out is None and not out.is_absolute():
        out = args.config.parent / out
    return cfg, out


def run(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "demo":
            out = args.out or Path("demo_out")
            seed = 20080915 if args.seed is None else args.seed
            pipeline.cmd_demo(out, seed, figures=not args.no_figures)
            print(f"demo written to {out}")
            return 0
        cfg, out = _resolve(args)
        if args.command != "report" and not args.config:
            raise InputError(f"{args.command} needs --config")
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "ingest":
            result = pipeline.cmd_ingest(cfg, out)
        elif args.command == "rmt":
            result = pipeline.cmd_rmt(cfg, out, args.period)
        elif args.command == "network":
            result = pipeline.cmd_network(cfg, out, args.period)
        elif args.command == "mfdfa":
            result = pipeline.cmd_mfdfa(cfg, out, args.period)
            result = {k: len(v) for k, v in result.items()}
        else:
            result = pipeline.cmd_report(cfg, out)
        print(json.dumps(result, indent=2, default=str))
        return 0
    except InputError as exc:
        log.error("%s", exc)
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

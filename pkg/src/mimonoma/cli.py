"""Command-line entry point: run an experiment preset and persist results."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .harness import build_experiment, emit, experiment_ids, run_experiment
from .sysmodel import SystemConfig


def _parse_override(text: str):
    key, sep, raw = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"override must look like KEY=VALUE, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mimonoma",
        description="Downlink multi-user MIMO / NOMA experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment preset")
    run.add_argument("experiment", help="experiment id, e.g. fig3 (see 'mimonoma list')")
    run.add_argument("--config", help="JSON system config file")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--trials", type=int, default=None, help="drops per sweep point")
    run.add_argument("--fading", type=int, default=None,
                     help="fading realizations per drop (NLOS experiments)")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--scheme", default=None,
                     help="comma-separated scheme subset, e.g. mMIMO,NOMA")
    run.add_argument("--csi", choices=("perfect", "estimated"), default=None)
    run.add_argument("--override", action="append", type=_parse_override, default=[],
                     metavar="KEY=VALUE", help="override a SystemConfig field")
    run.add_argument("--verbose", action="store_true", help="enable solver trace logging")

    sub.add_parser("list", help="list known experiment ids")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for eid in experiment_ids():
            print(eid)
        return 0

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = SystemConfig.from_file(args.config) if args.config else None
        schemes = args.scheme.split(",") if args.scheme else None
        spec = build_experiment(
            args.experiment, seed=args.seed, trials=args.trials, fading=args.fading,
            schemes=schemes, csi=args.csi, config=config,
            overrides=dict(args.override) if args.override else None)
        table = run_experiment(spec)
        paths = emit(table, args.out)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())

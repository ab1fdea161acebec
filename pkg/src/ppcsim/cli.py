"""Command-line entry point: run presets or config files, list, validate.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import validate_config
from .errors import ConfigError, NumericsError, PpcsimError
from .presets import PRESETS, list_presets, run_preset


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppcsim",
        description="Exciton-vibration coherence dynamics: semiclassical and "
        "chain-mapped MPS engines with reproducible experiment presets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a named preset or a config JSON file")
    p_run.add_argument("target", help="preset name or path to a config file")
    p_run.add_argument("--seed", type=int, default=2024, help="master seed")
    p_run.add_argument("--out", default="runs", help="artifact directory root")
    p_run.add_argument(
        "--override", action="append", default=[], metavar="KEY.PATH=VALUE",
        help="override a config entry (JSON-parsed value); repeatable",
    )

    sub.add_parser("list-presets", help="list available experiment presets")

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config", help="path to the config JSON")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-presets":
            for preset in list_presets():
                print(f"{preset.name:18s} [{preset.engine:13s}] {preset.description}")
            return 0
        if args.command == "validate":
            spec = validate_config(args.config)
            print("config OK")
            print(spec.describe())
            return 0
        if args.command == "run":
            if args.target not in PRESETS:
                spec = validate_config(args.target)  # raises ConfigError if bad
            out = run_preset(
                args.target, overrides=args.override,
                master_seed=args.seed, out_dir=args.out,
            )
            print(f"artifacts written to {out}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericsError, PpcsimError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line interface: rainforge render / validate / stats."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import RainforgeError
from .pipeline import manifest_stats_rows, run_batch, validate_config, write_stats_csv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rainforge",
        description="Render paired rainy/clean image records from a JSON config.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    render = sub.add_parser("render", help="run all jobs in a config")
    render.add_argument("--config", required=True, help="path to JSON config")
    render.add_argument("--jobs", type=int, default=1, help="parallel worker count")
    render.add_argument(
        "--fail-fast", action="store_true", help="abort the batch on first job error"
    )
    render.add_argument(
        "--hdr", action="store_true", help="also write unclamped PFM rainy images"
    )
    render.add_argument(
        "--export-quads", action="store_true", help="export streak billboards as OBJ"
    )
    render.add_argument(
        "--quads-per-pixel",
        action="store_true",
        help="subdivide exported streak quads per image pixel",
    )
    render.add_argument(
        "--seed-override", type=int, default=None, help="replace every job's seed"
    )

    validate = sub.add_parser("validate", help="schema-check a config")
    validate.add_argument("--config", required=True)

    stats = sub.add_parser("stats", help="emit per-record stats as CSV")
    stats.add_argument("--manifest", required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "render":
            overrides = {}
            if args.hdr:
                overrides["hdr"] = True
            if args.export_quads:
                overrides["export_quads"] = True
            if args.quads_per_pixel:
                overrides["export_quads"] = True
                overrides["quads_per_pixel"] = True
            if args.seed_override is not None:
                overrides["seed"] = args.seed_override
            manifest = run_batch(
                args.config,
                parallelism=args.jobs,
                fail_fast=args.fail_fast,
                overrides=overrides or None,
            )
            ok = len(manifest["records"])
            failed = len(manifest["errors"])
            print(f"rendered {ok} record(s), {failed} failure(s)")
            for err in manifest["errors"]:
                print(f"  FAILED {err['name']}: {err['error']}: {err['message']}")
            return 1 if failed else 0
        if args.command == "validate":
            validate_config(json.loads(Path(args.config).read_text()))
            print("config OK")
            return 0
        if args.command == "stats":
            write_stats_csv(args.manifest, sys.stdout)
            return 0
    except RainforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

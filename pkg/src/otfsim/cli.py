"""Command-line entry point for the experiment harness.

    otfsim <experiment> [--config FILE] [--seed N] [--out PATH]
                        [--profile {ci,paper}] [--workers N]

Experiments: snapshot, sync-accuracy, threshold-sweep, mse, ber.
Settings resolve in order profile defaults -> config file -> flags; the
CSV goes to --out with a JSON run manifest alongside.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import harness


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otfsim",
        description="OTFS joint-sync/channel-estimation experiment harness",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for kind in harness.EXPERIMENT_KINDS:
        name = kind.replace("_", "-")
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON config file (overrides profile defaults)")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", default=f"{kind}.csv", help="output CSV path")
        p.add_argument(
            "--profile",
            choices=("ci", "paper"),
            default="ci",
            help="built-in geometry/trial defaults",
        )
        p.add_argument("--workers", type=int, help="worker process count")
        p.set_defaults(kind=kind)
    return parser


def resolve_config(args: argparse.Namespace) -> harness.ExperimentConfig:
    config = harness.profile_config(args.kind, args.profile)
    if args.config:
        file_cfg = harness.load_config(args.config)
        if file_cfg.kind != args.kind:
            raise SystemExit(
                f"config kind {file_cfg.kind!r} does not match experiment {args.kind!r}"
            )
        config = file_cfg
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    config = resolve_config(args)
    records = harness.run_experiment(config, args.out)
    print(f"{args.kind}: wrote {len(records)} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

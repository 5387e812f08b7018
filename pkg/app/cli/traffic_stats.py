import argparse
import csv
import sys

from pathlib import Path

import numpy as np

from app.cli.common import check_overrides, execute
from app.core.config import load_run_config
from app.core.errors import ConfigurationError
from app.services.experiment_service import build_scenario
from app.services.traffic import sample_inter_arrival, sample_packet_size, summarize_samples
from app.util.random_streams import RandomStreams, Stream

HEADER = ["slice", "quantity", "unit", "target_mean", "samples", "mean", "std", "min", "p50", "p95", "max"]


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "traffic-stats",
        help="sample a slice's traffic models and print calibration statistics as CSV",
    )
    parser.add_argument("--slice", dest="slice_name", required=True)
    parser.add_argument("-n", "--samples", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", type=Path, help="take slice definitions from a run config")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, overrides: list[str]) -> int:
    def command() -> None:
        if args.samples < 1:
            raise ConfigurationError("-n must be positive")
        config = load_run_config(args.config, check_overrides(overrides))
        specs = {spec.name: (index, spec) for index, spec in enumerate(build_scenario(config))}
        if args.slice_name not in specs:
            raise ConfigurationError(
                f"unknown slice {args.slice_name!r}; known slices: {', '.join(specs)}"
            )
        index, spec = specs[args.slice_name]
        rng = RandomStreams(args.seed).generator(Stream.TRAFFIC, index, 0)

        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(HEADER)
        gaps = np.asarray(sample_inter_arrival(spec.inter_arrival, rng, args.samples))
        sizes = np.asarray(sample_packet_size(spec.packet_size, rng, args.samples))
        for quantity, unit, target, values in (
            ("inter_arrival", "ms", spec.inter_arrival.mean, gaps),
            ("packet_size", "bytes", spec.packet_size.mean, sizes),
        ):
            stats = summarize_samples(values)
            writer.writerow(
                [spec.name, quantity, unit, target]
                + [stats[key] for key in ("samples", "mean", "std", "min", "p50", "p95", "max")]
            )

    return execute(command)

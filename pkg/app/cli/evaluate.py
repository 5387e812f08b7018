import argparse
import json

from pathlib import Path

from app.cli.common import check_overrides, execute, reject_overrides
from app.core.config import load_run_config
from app.dependencies import get_experiment_service


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "evaluate",
        help="greedy rollout of a saved checkpoint; writes eval.csv and eval_summary.json",
    )
    parser.add_argument("--checkpoint", type=Path, required=True, help="checkpoint directory")
    parser.add_argument(
        "--config",
        type=Path,
        help="run configuration; defaults to the config echo in the run's summary.json",
    )
    parser.add_argument("--episodes", type=int, default=100)
    parser.add_argument("--output-dir", dest="output_dir", type=Path)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, overrides: list[str]) -> int:
    def command() -> None:
        config = None
        if args.config is not None:
            config = load_run_config(args.config, check_overrides(overrides))
        else:
            reject_overrides(overrides)
        snapshot = get_experiment_service().evaluate(
            args.checkpoint, config, args.episodes, args.output_dir
        )
        print(json.dumps(snapshot, indent=2, sort_keys=True))

    return execute(command)

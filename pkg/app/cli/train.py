import argparse
import logging

from pathlib import Path

from app.cli.common import check_overrides, execute, flag_overrides, output_directory
from app.core.config import load_run_config
from app.dependencies import get_experiment_service

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "train",
        help="train an agent and write metrics.csv, summary.json and a checkpoint",
        description="Extra --section.key=value arguments override the config file.",
    )
    parser.add_argument("--config", type=Path, help="INI run configuration")
    parser.add_argument("--agent", choices=["dnaf", "dqn", "equal"])
    parser.add_argument("--seed", type=int)
    parser.add_argument("--episodes", type=int)
    parser.add_argument("--runs", type=int, help="independent seeded runs, seed..seed+runs-1")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, overrides: list[str]) -> int:
    def command() -> None:
        config = load_run_config(
            args.config,
            flag_overrides(
                agent=args.agent,
                seed=args.seed,
                episodes=args.episodes,
                runs=args.runs,
                output_dir=args.output_dir,
            )
            + check_overrides(overrides),
        )
        target = output_directory(config, f"{config.run.agent}_seed{config.run.seed}")
        summaries = get_experiment_service().train(config, target)
        for summary in summaries:
            logger.info(
                "%s seed %s: final mean reward %s over the last %s episodes",
                summary.agent,
                summary.seed,
                summary.final_mean_reward,
                min(summary.final_window, summary.episodes),
            )

    return execute(command)

import argparse

from typing import Optional, Sequence

from app.cli import actions, compare, evaluate, traffic_stats, train
from app.core.config import get_settings
from app.core.logging import configure_logging


def create_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="slicing",
        description=f"{settings.app_name} {settings.version}",
    )
    parser.add_argument("--log-level", dest="log_level", help="overrides SLICING_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)
    train.register(subparsers)
    evaluate.register(subparsers)
    compare.register(subparsers)
    actions.register(subparsers)
    traffic_stats.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = create_parser()
    args, overrides = parser.parse_known_args(argv)
    configure_logging(args.log_level)
    return args.handler(args, overrides)

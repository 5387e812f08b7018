import argparse

from app.cli.common import execute, reject_overrides
from app.services.action_space import action_count, enumerate_actions, make_grid


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("actions", help="count or list the valid allocations of a grid")
    parser.add_argument("--W", dest="total_bandwidth", type=float, required=True, help="total MHz")
    parser.add_argument("--delta", dest="resolution", type=float, required=True, help="step MHz")
    parser.add_argument("--N", dest="slice_count", type=int, required=True, help="slices")
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--count", action="store_true")
    mode.add_argument("--list", action="store_true")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, overrides: list[str]) -> int:
    def command() -> None:
        reject_overrides(overrides)
        grid = make_grid(args.total_bandwidth, args.resolution, args.slice_count)
        if args.count:
            print(action_count(grid))
            return
        for allocation in enumerate_actions(grid):
            print(" ".join(f"{width:g}" for width in allocation.bandwidths))

    return execute(command)

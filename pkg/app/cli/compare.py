import argparse
import json

from pathlib import Path

from app.cli.common import check_overrides, execute, flag_overrides, output_directory
from app.core.config import load_run_config
from app.dependencies import get_experiment_service


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "compare",
        help="train DNAF, DQN and the equal split on the same scenario and seeds",
    )
    parser.add_argument("--config", type=Path)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--runs", type=int)
    parser.add_argument("--episodes", type=int)
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument(
        "--noise",
        choices=["configured", "both"],
        default="configured",
        help="'both' adds a DNAF run with uniform exploration noise",
    )
    parser.add_argument(
        "--dqn-override",
        dest="dqn_overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override applied to the DQN variant only, e.g. grid.resolution_mhz=0.2",
    )
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, overrides: list[str]) -> int:
    def command() -> None:
        shared = flag_overrides(
            seed=args.seed, runs=args.runs, episodes=args.episodes, output_dir=args.output_dir
        ) + check_overrides(overrides)
        variants = {
            "dnaf": load_run_config(args.config, shared + ["--run.agent=dnaf"]),
            "dqn": load_run_config(
                args.config,
                shared
                + ["--run.agent=dqn"]
                + check_overrides([f"--{item.lstrip('-')}" for item in args.dqn_overrides]),
            ),
            "equal": load_run_config(args.config, shared + ["--run.agent=equal"]),
        }
        target = output_directory(variants["dnaf"], "compare")
        if args.noise == "both":
            del variants["dnaf"]
            variants["dnaf_normal"] = load_run_config(
                args.config,
                shared + ["--run.agent=dnaf", "--exploration.noise.distribution=normal"],
            )
            variants["dnaf_uniform"] = load_run_config(
                args.config,
                shared + ["--run.agent=dnaf", "--exploration.noise.distribution=uniform"],
            )
        report = get_experiment_service().compare(variants, target)
        print(json.dumps(report, indent=2, sort_keys=True))

    return execute(command)

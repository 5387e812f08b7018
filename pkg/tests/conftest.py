import sys
from pathlib import Path

import pytest


def pytest_sessionstart(session):
    project_root = Path(__file__).resolve().parents[1]
    sys.path.insert(0, str(project_root))


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="run desk-scale training comparisons",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale training runs, enabled with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_run_args(tmp_path):
    """CLI arguments for a seconds-long training run on a shrunken scenario."""
    return [
        "--config",
        str(Path(__file__).resolve().parents[1] / "configs" / "reduced.cfg"),
        "--output-dir",
        str(tmp_path / "run"),
        "--episodes",
        "40",
        "--seed",
        "3",
        "--slots.slots_per_interval=40",
        "--scenario.user_counts=2,2,1",
        "--agent.minibatch_size=8",
        "--agent.hidden_sizes=16,16",
        "--agent.target_sync_period=10",
        "--run.log_every=0",
    ]

"""Builds environments and agents from a run configuration and runs the
train / evaluate / compare workflows against a run directory."""

from __future__ import annotations

import logging
import time

from pathlib import Path
from typing import Any, Optional, Protocol, Union

import numpy as np

from app.adapters.checkpoint_store import CheckpointStore, FileCheckpointStore
from app.adapters.metrics_sink import CsvMetricsSink, CsvSlotTrace
from app.adapters.run_pool import RunPool
from app.adapters.storage import LocalStorage, Storage
from app.core.config import run_config_from_echo
from app.core.errors import ConfigurationError
from app.domain.models import RunSummary
from app.domain.run_config import RunConfig
from app.domain.slices import SliceSpec
from app.services.action_space import make_grid
from app.services.analysis import relative_gap
from app.services.baselines import EqualAllocationAgent
from app.services.dqn_agent import DqnAgent
from app.services.link_sim import SlotTrace
from app.services.naf_agent import NafAgent
from app.services.slicing_env import SlicingEnv
from app.services.traffic import default_scenario, scaled_scenario
from app.services.training_service import Agent, run_evaluation, run_training, summarize_run
from app.util import constants
from app.util.random_streams import RandomStreams

AgentType = Union[NafAgent, DqnAgent, EqualAllocationAgent]


def build_scenario(config: RunConfig) -> list[SliceSpec]:
    specs = list(config.slices) if config.slices else default_scenario()
    if config.scenario.user_counts is not None:
        try:
            specs = scaled_scenario(list(config.scenario.user_counts), specs)
        except ValueError as exc:
            raise ConfigurationError(f"[scenario] user_counts: {exc}") from exc
    return specs


def build_environment(config: RunConfig, trace: Optional[SlotTrace] = None) -> SlicingEnv:
    grid = make_grid(
        config.grid.total_bandwidth_mhz, config.grid.resolution_mhz, config.grid.slice_count
    )
    return SlicingEnv(
        build_scenario(config),
        grid,
        config.reward,
        slot_config=config.slots,
        channel=config.channel,
        demand_unit=config.observation.demand_unit,
        normalizers=config.observation.normalizers,
        trace=trace,
        trace_intervals=config.debug.trace_intervals if trace is not None else 0,
    )


def build_agent(
    config: RunConfig,
    env: SlicingEnv,
    seed: int,
    kind: Optional[str] = None,
) -> AgentType:
    kind = kind or config.run.agent
    streams = RandomStreams(seed)
    if kind == "dnaf":
        return NafAgent(config.agent_config(), env.grid, env.observation_size, streams)
    if kind == "dqn":
        return DqnAgent(config.agent_config(), env.grid, env.observation_size, streams)
    if kind == "equal":
        return EqualAllocationAgent(env.grid)
    raise ConfigurationError(f"unknown agent kind {kind!r}")


def config_echo(config: RunConfig, seed: int) -> dict[str, Any]:
    """Config of a single run with the seed it actually used."""
    run = config.run.model_copy(update={"seed": seed, "runs": 1})
    return config.model_copy(update={"run": run}).model_dump(mode="json")


class ExperimentServiceProtocol(Protocol):
    def train(self, config: RunConfig, output_dir: Path) -> list[RunSummary]: ...

    def evaluate(
        self,
        checkpoint_dir: Path,
        config: Optional[RunConfig],
        episodes: int,
        output_dir: Optional[Path] = None,
    ) -> dict[str, Any]: ...

    def compare(self, variants: dict[str, RunConfig], output_dir: Path) -> dict[str, Any]: ...


class ExperimentService(ExperimentServiceProtocol):
    def __init__(
        self,
        *,
        checkpoint_store: Optional[CheckpointStore] = None,
        run_pool: Optional[RunPool] = None,
    ) -> None:
        self._checkpoints = checkpoint_store or FileCheckpointStore()
        self._pool = run_pool or RunPool()
        self._logger = logging.getLogger(self.__class__.__name__)

    def train(self, config: RunConfig, output_dir: Path) -> list[RunSummary]:
        """One run per seed; with several seeds each gets its own subdirectory."""
        storage = LocalStorage(output_dir)
        seeds = [config.run.seed + offset for offset in range(config.run.runs)]
        if len(seeds) == 1:
            return [self._train_one(config, seeds[0], storage)]
        return self._pool.map(
            lambda seed: self._train_one(config, seed, storage.child(f"seed_{seed}")), seeds
        )

    def evaluate(
        self,
        checkpoint_dir: Path,
        config: Optional[RunConfig],
        episodes: int,
        output_dir: Optional[Path] = None,
    ) -> dict[str, Any]:
        manifest, networks = self._checkpoints.load(checkpoint_dir)
        if config is None:
            summary = LocalStorage(Path(checkpoint_dir).parent).read_json(constants.SUMMARY_FILE)
            config = run_config_from_echo(summary["config"])
        storage = LocalStorage(output_dir or Path(checkpoint_dir).parent)

        env = build_environment(config)
        agent = build_agent(config, env, config.run.seed, kind=manifest.get("agent"))
        agent.load_networks(networks)

        with CsvMetricsSink(storage.path(constants.EVAL_FILE), env.slice_names) as sink:
            log = run_evaluation(env, agent, episodes, config.run.seed, [sink])

        snapshot = {
            "agent": agent.name,
            "checkpoint": str(checkpoint_dir),
            "episodes": len(log),
            "seed": config.run.seed,
            "mean_reward": float(np.mean([m.reward for m in log])) if log else None,
            "mean_se": float(np.mean([m.se for m in log])) if log else None,
            "mean_qoe_aggregate": float(np.mean([m.qoe_aggregate for m in log])) if log else None,
            "mean_qoe": {
                name: float(np.mean([m.qoe[name] for m in log])) for name in env.slice_names
            }
            if log
            else {},
            "mean_bandwidth_mhz": {
                name: float(np.mean([m.bandwidths[name] for m in log])) for name in env.slice_names
            }
            if log
            else {},
        }
        storage.write_json(constants.EVAL_SUMMARY_FILE, snapshot)
        self._logger.info(
            "evaluated %s over %s episodes: se=%s qoe=%s",
            agent.name,
            len(log),
            snapshot["mean_se"],
            snapshot["mean_qoe_aggregate"],
        )
        return snapshot

    def compare(self, variants: dict[str, RunConfig], output_dir: Path) -> dict[str, Any]:
        """Train every variant on every seed and rank them by final-window reward."""
        storage = LocalStorage(output_dir)
        jobs = [
            (label, config, config.run.seed + offset)
            for label, config in variants.items()
            for offset in range(config.run.runs)
        ]
        summaries = self._pool.map(
            lambda job: (
                job[0],
                self._train_one(job[1], job[2], storage.child(f"{job[0]}/seed_{job[2]}")),
            ),
            jobs,
        )

        report: dict[str, Any] = {"variants": {}}
        for label in variants:
            runs = [summary for name, summary in summaries if name == label]
            finals = [s.final_mean_reward for s in runs if s.final_mean_reward is not None]
            report["variants"][label] = {
                "runs": [
                    {
                        "seed": s.seed,
                        "final_mean_reward": s.final_mean_reward,
                        "cumulative_reward": s.cumulative_reward,
                        "convergence_episode": s.convergence_episode,
                    }
                    for s in runs
                ],
                "mean_final_reward": float(np.mean(finals)) if finals else None,
            }

        baseline = report["variants"].get("equal", {}).get("mean_final_reward")
        if baseline is not None:
            for entry in report["variants"].values():
                if entry["mean_final_reward"] is not None:
                    entry["gap_to_equal"] = relative_gap(entry["mean_final_reward"], baseline)
        storage.write_json(constants.COMPARISON_FILE, report)
        return report

    def _train_one(self, config: RunConfig, seed: int, storage: Storage) -> RunSummary:
        trace = (
            CsvSlotTrace(storage.path(constants.SLOT_TRACE_FILE)) if config.debug.slot_trace else None
        )
        try:
            env = build_environment(config, trace)
            agent: Agent = build_agent(config, env, seed)
            self._logger.info(
                "training %s for %s episodes (seed %s) into %s",
                agent.name,
                config.run.episodes,
                seed,
                storage.root,
            )
            started = time.perf_counter()
            with CsvMetricsSink(storage.path(constants.METRICS_FILE), env.slice_names) as sink:
                log = run_training(
                    env,
                    agent,
                    config.run.episodes,
                    seed,
                    [sink],
                    log_every=config.run.log_every,
                )
            elapsed = time.perf_counter() - started
        finally:
            if trace is not None:
                trace.close()

        networks = agent.networks()
        if networks:
            self._checkpoints.save(
                storage.path(constants.CHECKPOINT_DIR),
                agent.name,
                networks,
                metadata={
                    "seed": seed,
                    "episodes": len(log),
                    "observation_size": env.observation_size,
                    "slices": env.slice_names,
                },
            )

        summary = summarize_run(
            agent.name,
            seed,
            log,
            slice_names=env.slice_names,
            final_window=config.run.final_window,
            wall_clock_s=elapsed,
            config=config_echo(config, seed),
        )
        storage.write_json(constants.SUMMARY_FILE, summary.model_dump(mode="json"))
        self._logger.info(
            "%s seed %s finished in %.1fs: final mean reward %s",
            agent.name,
            seed,
            elapsed,
            summary.final_mean_reward,
        )
        return summary

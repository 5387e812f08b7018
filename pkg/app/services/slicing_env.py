"""Environment contract over the link simulator: observations, reward, step/reset."""

from __future__ import annotations

import logging

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from app.core.errors import ConfigurationError, SlicingError
from app.domain.models import (
    Allocation,
    AllocationGrid,
    ChannelConfig,
    EpisodeMetrics,
    IntervalStats,
    RewardWeights,
    SlotConfig,
)
from app.domain.slices import SliceSpec
from app.services.action_space import validate_allocation
from app.services.baselines import equal_allocation
from app.services.link_sim import LinkSimulator, SlotTrace
from app.util.random_streams import RandomStreams

DemandUnit = Literal["packets", "bytes"]


@dataclass(frozen=True)
class QoeReport:
    per_slice: dict[str, float]
    aggregate: float


@dataclass(frozen=True)
class StepResult:
    next_observation: np.ndarray
    reward: float
    metrics: EpisodeMetrics


def compute_se(stats: IntervalStats, total_bandwidth_hz: float, interval_s: float) -> float:
    """Delivered bits per second per Hz of the whole band."""
    return stats.total_delivered_bits / (total_bandwidth_hz * interval_s)


def compute_qoe(stats: IntervalStats) -> QoeReport:
    """Satisfied over arrived packets; stalled arrivals count in the denominator.

    A slice without arrivals is vacuously satisfied. The aggregate weights
    slices by their arrivals.
    """
    per_slice: dict[str, float] = {}
    satisfied_total = 0
    arrived_total = 0
    for name, counters in stats.slices.items():
        if counters.arrived_packets == 0:
            per_slice[name] = 1.0
            continue
        per_slice[name] = counters.satisfied_packets / counters.arrived_packets
        satisfied_total += counters.satisfied_packets
        arrived_total += counters.arrived_packets
    aggregate = satisfied_total / arrived_total if arrived_total else 1.0
    return QoeReport(per_slice=per_slice, aggregate=aggregate)


def compute_reward(se: float, qoe: float, weights: RewardWeights) -> float:
    return weights.se_weight * se + weights.qoe_weight * qoe


def validate_scenario(scenario: Sequence[SliceSpec], grid: AllocationGrid) -> None:
    if not scenario:
        raise ConfigurationError("scenario has no slices")
    if len(scenario) != grid.slice_count:
        raise ConfigurationError(
            f"scenario has {len(scenario)} slices but the grid allocates {grid.slice_count}"
        )
    names = [spec.name for spec in scenario]
    if len(set(names)) != len(names):
        raise ConfigurationError(f"slice names must be distinct, got {names}")


class SlicingEnv:
    """One base station whose bandwidth is re-split among slices every interval."""

    def __init__(
        self,
        scenario: Sequence[SliceSpec],
        grid: AllocationGrid,
        weights: RewardWeights,
        *,
        slot_config: Optional[SlotConfig] = None,
        channel: Optional[ChannelConfig] = None,
        demand_unit: DemandUnit = "packets",
        normalizers: Optional[Sequence[float]] = None,
        trace: Optional[SlotTrace] = None,
        trace_intervals: int = 0,
    ) -> None:
        validate_scenario(scenario, grid)
        self.scenario = list(scenario)
        self.grid = grid
        self.weights = weights
        self.slot_config = slot_config or SlotConfig()
        self.channel = channel or ChannelConfig()
        self.demand_unit = demand_unit
        self.normalizers = self._resolve_normalizers(normalizers)
        self._trace = trace
        self._trace_intervals = trace_intervals
        self._simulator: Optional[LinkSimulator] = None
        self._episode = 0
        self._logger = logging.getLogger(self.__class__.__name__)

    @property
    def slice_names(self) -> list[str]:
        return [spec.name for spec in self.scenario]

    @property
    def observation_size(self) -> int:
        return len(self.scenario)

    @property
    def simulator(self) -> LinkSimulator:
        if self._simulator is None:
            raise SlicingError("environment used before reset")
        return self._simulator

    def reset(self, seed: int) -> np.ndarray:
        """Fresh queues and streams, then one warm-up interval under equal allocation."""
        self._simulator = LinkSimulator(
            self.scenario,
            self.slot_config,
            self.channel,
            RandomStreams(seed),
            trace=self._trace,
            trace_intervals=self._trace_intervals,
        )
        self._episode = 0
        warmup = equal_allocation(self.grid)
        stats = self._simulator.run_interval(warmup.bandwidths_hz)
        self._logger.debug("reset with seed %s, warm-up allocation %s", seed, warmup)
        return self.observe(stats)

    def step(self, action: Allocation) -> StepResult:
        validate_allocation(action, self.grid)
        stats = self.simulator.run_interval(action.bandwidths_hz)

        se = compute_se(stats, self.grid.total_bandwidth_hz, self.slot_config.interval_s)
        qoe = compute_qoe(stats)
        reward = compute_reward(se, qoe.aggregate, self.weights)
        metrics = EpisodeMetrics(
            episode=self._episode,
            reward=reward,
            se=se,
            qoe_aggregate=qoe.aggregate,
            qoe=qoe.per_slice,
            bandwidths=dict(zip(self.slice_names, action.bandwidths)),
            stats=stats,
        )
        self._episode += 1
        return StepResult(next_observation=self.observe(stats), reward=reward, metrics=metrics)

    def observe(self, stats: IntervalStats) -> np.ndarray:
        if self.demand_unit == "bytes":
            demand = [stats.slices[name].arrived_bits / 8.0 for name in self.slice_names]
        else:
            demand = [float(stats.slices[name].arrived_packets) for name in self.slice_names]
        return np.asarray(demand, dtype=np.float64) / self.normalizers

    def _resolve_normalizers(self, normalizers: Optional[Sequence[float]]) -> np.ndarray:
        if normalizers is not None:
            values = np.asarray(normalizers, dtype=np.float64)
            if values.shape != (len(self.scenario),) or np.any(values <= 0):
                raise ConfigurationError(
                    f"expected {len(self.scenario)} positive demand normalizers, got {list(normalizers)}"
                )
            return values
        interval_ms = self.slot_config.interval_ms
        expected = [
            spec.expected_bytes(interval_ms)
            if self.demand_unit == "bytes"
            else spec.expected_arrivals(interval_ms)
            for spec in self.scenario
        ]
        return np.asarray([value if value > 0 else 1.0 for value in expected], dtype=np.float64)

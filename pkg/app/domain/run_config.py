"""Sections of a run configuration file."""

from __future__ import annotations

from typing import Annotated, Literal, Optional

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator

from app.domain.learning import AgentConfig, EpsilonSchedule, NoiseSchedule
from app.domain.models import ChannelConfig, RewardWeights, SlotConfig
from app.domain.slices import SliceSpec
from app.util.constants import DEFAULT_FINAL_WINDOW


def _split_commas(value: object) -> object:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


IntList = Annotated[tuple[int, ...], BeforeValidator(_split_commas)]
FloatList = Annotated[tuple[float, ...], BeforeValidator(_split_commas)]


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class RunSection(_Section):
    agent: Literal["dnaf", "dqn", "equal"] = "dnaf"
    episodes: int = Field(default=3000, ge=0)
    seed: int = Field(default=0, ge=0)
    output_dir: Optional[str] = None
    runs: int = Field(default=1, ge=1)
    log_every: int = Field(default=100, ge=0)
    final_window: int = Field(default=DEFAULT_FINAL_WINDOW, ge=1)


class GridSection(_Section):
    total_bandwidth_mhz: float = Field(default=10.0, gt=0)
    resolution_mhz: float = Field(default=0.2, gt=0)
    slice_count: int = Field(default=3, ge=1)


class AgentSection(_Section):
    discount: float = Field(default=0.9, ge=0, lt=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    optimizer: Literal["sgd", "adam"] = "sgd"
    target_sync_period: int = Field(default=50, ge=1)
    minibatch_size: int = Field(default=32, ge=1)
    buffer_capacity: int = Field(default=10_000, ge=1)
    knn_k: int = Field(default=1, ge=1)
    hidden_sizes: IntList = (64, 64)

    @model_validator(mode="after")
    def _check_minibatch(self) -> "AgentSection":
        if self.minibatch_size > self.buffer_capacity:
            raise ValueError("minibatch_size cannot exceed buffer_capacity")
        return self


class ExplorationSection(_Section):
    noise: NoiseSchedule = Field(default_factory=NoiseSchedule)
    epsilon: EpsilonSchedule = Field(default_factory=EpsilonSchedule)


class ObservationSection(_Section):
    demand_unit: Literal["packets", "bytes"] = "packets"
    normalizers: Optional[FloatList] = None


class ScenarioSection(_Section):
    user_counts: Optional[IntList] = None


class DebugSection(_Section):
    slot_trace: bool = False
    trace_intervals: int = Field(default=1, ge=0)


class RunConfig(_Section):
    """Everything a run needs; its JSON dump reproduces the run."""

    run: RunSection = Field(default_factory=RunSection)
    grid: GridSection = Field(default_factory=GridSection)
    reward: RewardWeights = Field(default_factory=RewardWeights)
    agent: AgentSection = Field(default_factory=AgentSection)
    exploration: ExplorationSection = Field(default_factory=ExplorationSection)
    channel: ChannelConfig = Field(default_factory=ChannelConfig)
    slots: SlotConfig = Field(default_factory=SlotConfig)
    observation: ObservationSection = Field(default_factory=ObservationSection)
    scenario: ScenarioSection = Field(default_factory=ScenarioSection)
    debug: DebugSection = Field(default_factory=DebugSection)
    slices: tuple[SliceSpec, ...] = ()

    @model_validator(mode="after")
    def _check_slices(self) -> "RunConfig":
        if self.slices and len(self.slices) != self.grid.slice_count:
            raise ValueError(
                f"{len(self.slices)} slice sections declared but grid.slice_count is {self.grid.slice_count}"
            )
        if self.observation.normalizers is not None and len(self.observation.normalizers) != self.grid.slice_count:
            raise ValueError("observation.normalizers needs one value per slice")
        return self

    def agent_config(self) -> AgentConfig:
        return AgentConfig(
            **self.agent.model_dump(),
            noise=self.exploration.noise,
            epsilon=self.exploration.epsilon,
        )

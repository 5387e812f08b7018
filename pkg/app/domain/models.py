from __future__ import annotations

import math

from dataclasses import dataclass, field
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

# Tolerance used when checking that W is an integer multiple of the resolution.
_LATTICE_TOLERANCE = 1e-9


class AllocationGrid(BaseModel):
    """Lattice of bandwidth allocations: N slices sharing W MHz in steps of Δ."""

    model_config = ConfigDict(frozen=True)

    total_bandwidth: float = Field(..., gt=0, description="W, MHz")
    resolution: float = Field(..., gt=0, description="Δ, MHz")
    slice_count: int = Field(..., ge=1, description="N")

    @model_validator(mode="after")
    def _check_lattice(self) -> "AllocationGrid":
        ratio = self.total_bandwidth / self.resolution
        if abs(ratio - round(ratio)) > _LATTICE_TOLERANCE * max(1.0, ratio):
            raise ValueError(
                f"total bandwidth {self.total_bandwidth} MHz is not a multiple of "
                f"resolution {self.resolution} MHz"
            )
        if self.total_units < self.slice_count:
            raise ValueError(
                f"floor(W/Δ)={self.total_units} is smaller than slice count {self.slice_count}"
            )
        return self

    @property
    def total_units(self) -> int:
        return int(math.floor(self.total_bandwidth / self.resolution + _LATTICE_TOLERANCE))

    @property
    def total_bandwidth_hz(self) -> float:
        return self.total_bandwidth * 1e6


class Allocation(BaseModel):
    """A lattice point, stored as integer multipliers of the grid resolution."""

    model_config = ConfigDict(frozen=True)

    multipliers: tuple[int, ...]
    resolution: float = Field(..., gt=0)

    @property
    def bandwidths(self) -> tuple[float, ...]:
        return tuple(round(k * self.resolution, 12) for k in self.multipliers)

    @property
    def bandwidths_hz(self) -> tuple[float, ...]:
        return tuple(k * self.resolution * 1e6 for k in self.multipliers)

    def fractions(self, total_units: int) -> tuple[float, ...]:
        return tuple(k / total_units for k in self.multipliers)

    def __str__(self) -> str:
        return "(" + ", ".join(f"{w:g}" for w in self.bandwidths) + ")"


class RewardWeights(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    se_weight: float = Field(default=0.01, ge=0, description="ζ, weight of spectrum efficiency")
    qoe_weight: float = Field(default=1.0, ge=0, description="β, weight of QoE satisfaction")

    @model_validator(mode="after")
    def _check_not_both_zero(self) -> "RewardWeights":
        if self.se_weight == 0 and self.qoe_weight == 0:
            raise ValueError("se_weight and qoe_weight cannot both be zero")
        return self


class SlotConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    slot_ms: float = Field(default=0.5, gt=0)
    slots_per_interval: int = Field(default=2000, ge=1)

    @property
    def interval_ms(self) -> float:
        return self.slot_ms * self.slots_per_interval

    @property
    def interval_s(self) -> float:
        return self.interval_ms / 1000.0


class ChannelConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    mean_snr_db: float = Field(default=20.0, description="mean SNR for every user")
    slice_snr_db: dict[str, float] = Field(
        default_factory=dict, description="per-slice override of mean_snr_db"
    )
    fixed_gain: Optional[float] = Field(
        default=None, ge=0, description="replace Rayleigh draws by a constant power gain"
    )

    def snr_linear(self, slice_name: str) -> float:
        snr_db = self.slice_snr_db.get(slice_name, self.mean_snr_db)
        return 10.0 ** (snr_db / 10.0)


@dataclass
class SliceCounters:
    arrived_packets: int = 0
    arrived_bits: float = 0.0
    delivered_packets: int = 0
    delivered_bits: float = 0.0
    satisfied_packets: int = 0
    expired_packets: int = 0
    expired_bits: float = 0.0
    stalled_arrivals: int = 0
    stalled_bits: float = 0.0
    pending_bits_start: float = 0.0
    pending_bits_end: float = 0.0


@dataclass
class IntervalStats:
    """Per-slice counters for one adjustment interval."""

    slices: dict[str, SliceCounters] = field(default_factory=dict)
    user_rates: dict[str, list[float]] = field(default_factory=dict)

    @classmethod
    def empty(cls, slice_names: list[str]) -> "IntervalStats":
        return cls(slices={name: SliceCounters() for name in slice_names})

    @property
    def total_delivered_bits(self) -> float:
        return sum(counters.delivered_bits for counters in self.slices.values())


class EpisodeMetrics(BaseModel):
    """One metrics.csv row; column order is fixed by csv_header."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    episode: int
    reward: float
    se: float
    qoe_aggregate: float
    qoe: dict[str, float]
    bandwidths: dict[str, float]
    exploration: float = 0.0
    loss: Optional[float] = None
    cumulative_reward: float = 0.0
    stats: Optional[IntervalStats] = Field(default=None, exclude=True)

    @staticmethod
    def csv_header(slice_names: list[str]) -> list[str]:
        return (
            ["episode", "reward", "se", "qoe_aggregate"]
            + [f"qoe_{name}" for name in slice_names]
            + [f"w_{name}" for name in slice_names]
            + ["exploration", "loss", "cumulative_reward"]
        )

    def csv_row(self, slice_names: list[str]) -> list[object]:
        return (
            [self.episode, self.reward, self.se, self.qoe_aggregate]
            + [self.qoe[name] for name in slice_names]
            + [self.bandwidths[name] for name in slice_names]
            + [self.exploration, "" if self.loss is None else self.loss, self.cumulative_reward]
        )


class RunSummary(BaseModel):
    agent: str
    seed: int
    episodes: int
    final_window: int
    final_mean_reward: Optional[float] = None
    final_mean_se: Optional[float] = None
    final_mean_qoe: dict[str, float] = Field(default_factory=dict)
    cumulative_reward: float = 0.0
    convergence_episode: Optional[int] = None
    last_loss: Optional[float] = None
    wall_clock_s: float = 0.0
    config: dict[str, object] = Field(default_factory=dict)

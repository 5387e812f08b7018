from __future__ import annotations

from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

BYTES_PER_MEGABYTE = 1_000_000


class _TrafficModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class UniformInterArrival(_TrafficModel):
    kind: Literal["uniform"] = "uniform"
    min_ms: float = Field(default=0.0, ge=0)
    max_ms: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _check_bounds(self) -> "UniformInterArrival":
        if self.max_ms <= self.min_ms:
            raise ValueError("max_ms must exceed min_ms")
        return self

    @property
    def mean(self) -> float:
        return (self.min_ms + self.max_ms) / 2.0


class TruncatedParetoInterArrival(_TrafficModel):
    kind: Literal["truncated_pareto"] = "truncated_pareto"
    exponent: float = Field(..., gt=1)
    mean_ms: float = Field(..., gt=0)
    max_ms: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _check_bounds(self) -> "TruncatedParetoInterArrival":
        if self.max_ms <= self.mean_ms:
            raise ValueError("max_ms must exceed mean_ms")
        return self

    @property
    def mean(self) -> float:
        return self.mean_ms


class ExponentialInterArrival(_TrafficModel):
    kind: Literal["exponential"] = "exponential"
    mean_ms: float = Field(..., gt=0)

    @property
    def mean(self) -> float:
        return self.mean_ms


class ConstantInterArrival(_TrafficModel):
    """Deterministic stream, mainly for hand-traced scenarios."""

    kind: Literal["constant"] = "constant"
    period_ms: float = Field(..., gt=0)

    @property
    def mean(self) -> float:
        return self.period_ms


class IdleInterArrival(_TrafficModel):
    """A user that never sends."""

    kind: Literal["idle"] = "idle"

    @property
    def mean(self) -> float:
        return float("inf")


InterArrivalModel = Annotated[
    Union[
        UniformInterArrival,
        TruncatedParetoInterArrival,
        ExponentialInterArrival,
        ConstantInterArrival,
        IdleInterArrival,
    ],
    Field(discriminator="kind"),
]


class ConstantPacketSize(_TrafficModel):
    kind: Literal["constant"] = "constant"
    bytes: float = Field(..., gt=0)

    @property
    def mean(self) -> float:
        return self.bytes


class TruncatedParetoPacketSize(_TrafficModel):
    kind: Literal["truncated_pareto"] = "truncated_pareto"
    exponent: float = Field(..., gt=1)
    mean_bytes: float = Field(..., gt=0)
    max_bytes: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _check_bounds(self) -> "TruncatedParetoPacketSize":
        if self.max_bytes <= self.mean_bytes:
            raise ValueError("max_bytes must exceed mean_bytes")
        return self

    @property
    def mean(self) -> float:
        return self.mean_bytes


class TruncatedLognormalPacketSize(_TrafficModel):
    kind: Literal["truncated_lognormal"] = "truncated_lognormal"
    mean_bytes: float = Field(..., gt=0)
    std_bytes: float = Field(..., gt=0)
    max_bytes: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _check_bounds(self) -> "TruncatedLognormalPacketSize":
        if self.max_bytes <= self.mean_bytes:
            raise ValueError("max_bytes must exceed mean_bytes")
        return self

    @property
    def mean(self) -> float:
        return self.mean_bytes


PacketSizeModel = Annotated[
    Union[ConstantPacketSize, TruncatedParetoPacketSize, TruncatedLognormalPacketSize],
    Field(discriminator="kind"),
]


class SliceSpec(BaseModel):
    """Traffic model and SLA of one slice."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = Field(..., min_length=1, max_length=32, pattern=r"^[A-Za-z0-9_]+$")
    user_count: int = Field(..., ge=1)
    inter_arrival: InterArrivalModel
    packet_size: PacketSizeModel
    sla_rate_bps: float = Field(..., gt=0)
    sla_latency_ms: float = Field(..., gt=0)

    def expected_arrivals(self, interval_ms: float) -> float:
        """Mean packet count of the whole slice over one interval."""
        mean = self.inter_arrival.mean
        if mean == float("inf"):
            return 0.0
        return self.user_count * interval_ms / mean

    def expected_bytes(self, interval_ms: float) -> float:
        return self.expected_arrivals(interval_ms) * self.packet_size.mean

from __future__ import annotations

import math

from typing import Literal

import numpy as np

from pydantic import BaseModel, ConfigDict, Field, model_validator


class NoiseSchedule(BaseModel):
    """Exploration noise added to μ(s); its scale decays linearly to zero."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    distribution: Literal["normal", "uniform"] = "normal"
    initial_scale: float = Field(default=0.15, ge=0, description="σ0 in normalized action units")
    decay_horizon: int = Field(default=3000, ge=1)

    def scale_at(self, t: int) -> float:
        return self.initial_scale * max(0.0, 1.0 - t / self.decay_horizon)

    def sample(self, rng: np.random.Generator, size: int, t: int) -> np.ndarray:
        """Uniform noise is drawn on ±σ√3 so both distributions share the same std."""
        scale = self.scale_at(t)
        if scale == 0.0:
            return np.zeros(size)
        if self.distribution == "uniform":
            half_width = scale * math.sqrt(3.0)
            return rng.uniform(-half_width, half_width, size)
        return rng.normal(0.0, scale, size)


class EpsilonSchedule(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    initial: float = Field(default=1.0, ge=0, le=1)
    final: float = Field(default=0.01, ge=0, le=1)
    decay_horizon: int = Field(default=3000, ge=1)

    @model_validator(mode="after")
    def _check_order(self) -> "EpsilonSchedule":
        if self.final > self.initial:
            raise ValueError("final epsilon cannot exceed the initial epsilon")
        return self

    def value_at(self, t: int) -> float:
        fraction = max(0.0, 1.0 - t / self.decay_horizon)
        return self.final + (self.initial - self.final) * fraction


class AgentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    discount: float = Field(default=0.9, ge=0, lt=1, description="γ")
    learning_rate: float = Field(default=1e-3, gt=0, description="α of the optimizer")
    optimizer: Literal["sgd", "adam"] = "sgd"
    target_sync_period: int = Field(default=50, ge=1, description="C, episodes between target clones")
    minibatch_size: int = Field(default=32, ge=1)
    buffer_capacity: int = Field(default=10_000, ge=1)
    knn_k: int = Field(default=1, ge=1)
    hidden_sizes: tuple[int, ...] = Field(default=(64, 64), min_length=1)
    noise: NoiseSchedule = Field(default_factory=NoiseSchedule)
    epsilon: EpsilonSchedule = Field(default_factory=EpsilonSchedule)

    @model_validator(mode="after")
    def _check_sizes(self) -> "AgentConfig":
        if any(size < 1 for size in self.hidden_sizes):
            raise ValueError("hidden layer sizes must be positive")
        if self.minibatch_size > self.buffer_capacity:
            raise ValueError("minibatch_size cannot exceed buffer_capacity")
        return self

"""Per-user packet streams for each slice."""

from __future__ import annotations

import math

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from scipy.optimize import brentq
from scipy.stats import norm

from app.domain.slices import (
    BYTES_PER_MEGABYTE,
    ConstantInterArrival,
    ConstantPacketSize,
    ExponentialInterArrival,
    IdleInterArrival,
    InterArrivalModel,
    PacketSizeModel,
    SliceSpec,
    TruncatedLognormalPacketSize,
    TruncatedParetoInterArrival,
    TruncatedParetoPacketSize,
    UniformInterArrival,
)

Sample = Union[float, np.ndarray]


@dataclass(slots=True)
class Packet:
    arrival_time: float
    size: float
    remaining: float


@dataclass
class TrafficState:
    """Next scheduled arrival per (slice, user); streams continue across intervals."""

    origin_ms: float = 0.0
    next_arrival_ms: dict[tuple[str, int], float] = field(default_factory=dict)

    def next_arrival(self, slice_name: str, user_id: int) -> float:
        return self.next_arrival_ms.get((slice_name, user_id), self.origin_ms)


def _bounded_pareto_mean(scale: float, exponent: float, upper: float) -> float:
    ratio = (scale / upper) ** exponent
    return (
        scale**exponent
        / (1.0 - ratio)
        * exponent
        / (exponent - 1.0)
        * (scale ** (1.0 - exponent) - upper ** (1.0 - exponent))
    )


@lru_cache(maxsize=64)
def pareto_scale(exponent: float, mean: float, upper: float) -> float:
    """Lower bound of the bounded Pareto whose mean equals the target mean."""
    return brentq(
        lambda scale: _bounded_pareto_mean(scale, exponent, upper) - mean,
        upper * 1e-12,
        upper * (1.0 - 1e-12),
        xtol=1e-14,
        rtol=1e-13,
        maxiter=500,
    )


def _truncated_lognormal_mean(mu: float, sigma: float, upper: float) -> float:
    log_upper = math.log(upper)
    log_ratio = norm.logcdf((log_upper - mu - sigma**2) / sigma) - norm.logcdf(
        (log_upper - mu) / sigma
    )
    return math.exp(mu + sigma**2 / 2.0 + log_ratio)


@lru_cache(maxsize=64)
def lognormal_parameters(mean: float, std: float, upper: float) -> tuple[float, float]:
    """Underlying normal (mu, sigma) whose lognormal, capped at upper, has the target mean.

    sigma comes from the untruncated moment match; mu is then moved by
    bisection until the truncated mean matches.
    """
    sigma = math.sqrt(math.log1p((std / mean) ** 2))
    mu = math.log(mean) - sigma**2 / 2.0
    low = mu - 10.0 * sigma
    high = math.log(upper) + 10.0 * sigma
    mu = brentq(
        lambda candidate: _truncated_lognormal_mean(candidate, sigma, upper) - mean,
        low,
        high,
        xtol=1e-14,
        maxiter=500,
    )
    return mu, sigma


def _sample_bounded_pareto(
    exponent: float, mean: float, upper: float, rng: np.random.Generator, size: Optional[int]
) -> Sample:
    scale = pareto_scale(exponent, mean, upper)
    shrink = 1.0 - (scale / upper) ** exponent
    uniforms = rng.random(size)
    values = scale / (1.0 - uniforms * shrink) ** (1.0 / exponent)
    return np.minimum(values, upper) if size is not None else min(float(values), upper)


def _sample_truncated_lognormal(
    model: TruncatedLognormalPacketSize, rng: np.random.Generator, size: Optional[int]
) -> Sample:
    mu, sigma = lognormal_parameters(model.mean_bytes, model.std_bytes, model.max_bytes)
    if size is None:
        while True:
            value = float(rng.lognormal(mu, sigma))
            if value <= model.max_bytes:
                return value
    values = rng.lognormal(mu, sigma, size)
    rejected = np.flatnonzero(values > model.max_bytes)
    while rejected.size:
        values[rejected] = rng.lognormal(mu, sigma, rejected.size)
        rejected = rejected[values[rejected] > model.max_bytes]
    return values


def sample_inter_arrival(
    model: InterArrivalModel, rng: np.random.Generator, size: Optional[int] = None
) -> Sample:
    """Inter-arrival time in ms; an ndarray when size is given."""
    match model:
        case UniformInterArrival():
            return _as_scalar(rng.uniform(model.min_ms, model.max_ms, size), size)
        case TruncatedParetoInterArrival():
            return _sample_bounded_pareto(model.exponent, model.mean_ms, model.max_ms, rng, size)
        case ExponentialInterArrival():
            return _as_scalar(rng.exponential(model.mean_ms, size), size)
        case ConstantInterArrival():
            return model.period_ms if size is None else np.full(size, model.period_ms)
        case IdleInterArrival():
            return math.inf if size is None else np.full(size, math.inf)
    raise TypeError(f"unsupported inter-arrival model {type(model).__name__}")


def sample_packet_size(
    model: PacketSizeModel, rng: np.random.Generator, size: Optional[int] = None
) -> Sample:
    """Packet size in bytes; an ndarray when size is given."""
    match model:
        case ConstantPacketSize():
            return model.bytes if size is None else np.full(size, model.bytes)
        case TruncatedParetoPacketSize():
            return _sample_bounded_pareto(
                model.exponent, model.mean_bytes, model.max_bytes, rng, size
            )
        case TruncatedLognormalPacketSize():
            return _sample_truncated_lognormal(model, rng, size)
    raise TypeError(f"unsupported packet size model {type(model).__name__}")


def _as_scalar(value: Sample, size: Optional[int]) -> Sample:
    return float(value) if size is None else value


def generate_arrivals(
    spec: SliceSpec,
    user_id: int,
    window: tuple[float, float],
    rng: np.random.Generator,
    state: TrafficState,
) -> list[Packet]:
    """Packets of one user arriving in [t0, t1); advances the user's carry state.

    A stream's first packet arrives at the state origin; each later arrival
    follows one inter-arrival draw. Size is drawn before the next gap.
    """
    start, end = window
    key = (spec.name, user_id)
    if isinstance(spec.inter_arrival, IdleInterArrival):
        state.next_arrival_ms[key] = math.inf
        return []
    arrival = state.next_arrival(spec.name, user_id)
    packets: list[Packet] = []
    while arrival < end:
        bits = float(sample_packet_size(spec.packet_size, rng)) * 8.0
        if arrival >= start:
            packets.append(Packet(arrival_time=arrival, size=bits, remaining=bits))
        arrival += float(sample_inter_arrival(spec.inter_arrival, rng))
    state.next_arrival_ms[key] = arrival
    return packets


def default_scenario() -> list[SliceSpec]:
    """VoLTE, video and URLLC slices sharing 100 users."""
    return [
        SliceSpec(
            name="volte",
            user_count=46,
            inter_arrival=UniformInterArrival(min_ms=0.0, max_ms=160.0),
            packet_size=ConstantPacketSize(bytes=40.0),
            sla_rate_bps=51e3,
            sla_latency_ms=10.0,
        ),
        SliceSpec(
            name="video",
            user_count=46,
            inter_arrival=TruncatedParetoInterArrival(exponent=1.2, mean_ms=6.0, max_ms=12.5),
            packet_size=TruncatedParetoPacketSize(exponent=1.2, mean_bytes=100.0, max_bytes=250.0),
            sla_rate_bps=5e6,
            sla_latency_ms=10.0,
        ),
        SliceSpec(
            name="urllc",
            user_count=8,
            inter_arrival=ExponentialInterArrival(mean_ms=180.0),
            packet_size=TruncatedLognormalPacketSize(
                mean_bytes=2.0 * BYTES_PER_MEGABYTE,
                std_bytes=0.722 * BYTES_PER_MEGABYTE,
                max_bytes=5.0 * BYTES_PER_MEGABYTE,
            ),
            sla_rate_bps=10e6,
            sla_latency_ms=5.0,
        ),
    ]


def scaled_scenario(user_counts: list[int], base: Optional[list[SliceSpec]] = None) -> list[SliceSpec]:
    specs = base if base is not None else default_scenario()
    if len(user_counts) != len(specs):
        raise ValueError(f"expected {len(specs)} user counts, got {len(user_counts)}")
    return [
        SliceSpec.model_validate({**spec.model_dump(), "user_count": count})
        for spec, count in zip(specs, user_counts)
    ]


def summarize_samples(values: np.ndarray) -> dict[str, float]:
    finite = values[np.isfinite(values)]
    return {
        "samples": float(values.size),
        "mean": float(finite.mean()) if finite.size else math.nan,
        "std": float(finite.std()) if finite.size else math.nan,
        "min": float(finite.min()) if finite.size else math.nan,
        "p50": float(np.percentile(finite, 50)) if finite.size else math.nan,
        "p95": float(np.percentile(finite, 95)) if finite.size else math.nan,
        "max": float(finite.max()) if finite.size else math.nan,
    }

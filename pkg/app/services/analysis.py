"""Summary statistics over per-episode reward curves."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from app.util.constants import (
    DEFAULT_CONVERGENCE_FRACTION,
    DEFAULT_FINAL_WINDOW,
    DEFAULT_MOVING_AVERAGE,
)


def final_window_mean(values: Sequence[float], window: int = DEFAULT_FINAL_WINDOW) -> Optional[float]:
    """Mean of the last `window` values (all of them when fewer exist)."""
    if window < 1:
        raise ValueError("window must be positive")
    if not len(values):
        return None
    return float(np.mean(np.asarray(values, dtype=np.float64)[-window:]))


def moving_average(values: Sequence[float], window: int = DEFAULT_MOVING_AVERAGE) -> np.ndarray:
    """Trailing mean; the first entries average over the values seen so far."""
    if window < 1:
        raise ValueError("window must be positive")
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        return data
    cumulative = np.concatenate(([0.0], np.cumsum(data)))
    ends = np.arange(1, data.size + 1)
    starts = np.maximum(0, ends - window)
    return (cumulative[ends] - cumulative[starts]) / (ends - starts)


def convergence_episode(
    rewards: Sequence[float],
    *,
    final_window: int = DEFAULT_FINAL_WINDOW,
    fraction: float = DEFAULT_CONVERGENCE_FRACTION,
    smoothing: int = DEFAULT_MOVING_AVERAGE,
) -> Optional[int]:
    """First episode whose trailing average reaches `fraction` of the final level.

    For a negative final level the threshold sits (1 - fraction)·|final| below it.
    """
    final = final_window_mean(rewards, final_window)
    if final is None:
        return None
    threshold = final - (1.0 - fraction) * abs(final)
    reached = np.flatnonzero(moving_average(rewards, smoothing) >= threshold)
    return int(reached[0]) if reached.size else None


def relative_gap(first: float, second: float) -> float:
    scale = max(abs(first), abs(second))
    if scale == 0.0:
        return 0.0
    return abs(first - second) / scale

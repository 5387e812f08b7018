from __future__ import annotations

import logging

from typing import Optional

import numpy as np

from app.domain.models import Allocation, AllocationGrid
from app.services.action_space import project_knn


def equal_allocation(grid: AllocationGrid) -> Allocation:
    """Lattice point nearest to W/N per slice."""
    share = grid.total_bandwidth / grid.slice_count
    return project_knn([share] * grid.slice_count, grid, 1)[0]


class EqualAllocationAgent:
    """Splits the band evenly every interval and never learns."""

    name = "equal"

    def __init__(self, grid: AllocationGrid) -> None:
        self.grid = grid
        self.allocation = equal_allocation(grid)
        self._logger = logging.getLogger(self.__class__.__name__)
        self._logger.info("equal allocation baseline uses %s", self.allocation)

    def exploration_at(self, episode: int) -> float:
        return 0.0

    def act(self, observation: np.ndarray, episode: int) -> Allocation:
        return self.allocation

    def greedy(self, observation: np.ndarray) -> Allocation:
        return self.allocation

    def observe(self, transition) -> Optional[float]:
        return None

    def end_episode(self, episode: int) -> None:
        return None

    def networks(self) -> dict:
        return {}

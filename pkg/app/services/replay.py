from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from app.core.errors import ArgumentError
from app.domain.models import Allocation


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: Allocation
    reward: float
    next_state: np.ndarray


class ReplayBuffer:
    """Bounded FIFO of transitions with uniform sampling without replacement."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ArgumentError("replay capacity must be positive")
        self.capacity = capacity
        self._items: deque[Transition] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def push(self, transition: Transition) -> None:
        self._items.append(transition)

    def items(self) -> list[Transition]:
        return list(self._items)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if batch_size < 1 or batch_size > len(self._items):
            raise ArgumentError(
                f"cannot sample {batch_size} transitions from a buffer of {len(self._items)}"
            )
        snapshot = self.items()
        return [snapshot[int(i)] for i in rng.choice(len(snapshot), size=batch_size, replace=False)]

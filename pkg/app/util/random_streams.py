from __future__ import annotations

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    TRAFFIC = 0
    CHANNEL = 1
    NETWORK_INIT = 2
    EXPLORATION = 3
    REPLAY = 4


class RandomStreams:
    """Derives independent generators from one run seed.

    A generator is identified by its stream id plus integer indices, so the
    sequence a consumer sees does not depend on which other streams were
    requested before it.
    """

    def __init__(self, seed: int) -> None:
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self._seed = int(seed)

    @property
    def seed(self) -> int:
        return self._seed

    def generator(self, stream: Stream, *indices: int) -> np.random.Generator:
        sequence = np.random.SeedSequence(
            self._seed, spawn_key=(int(stream), *(int(i) for i in indices))
        )
        return np.random.default_rng(sequence)

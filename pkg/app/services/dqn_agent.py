"""Deep Q-network baseline: one output per lattice allocation."""

from __future__ import annotations

import logging

from typing import Optional, Sequence

import numpy as np

from app.core.errors import ArgumentError, NumericError, ShapeError
from app.domain.learning import AgentConfig
from app.domain.models import Allocation, AllocationGrid
from app.services.action_space import action_count, action_index, allocation_at
from app.services.neural import DenseNetwork, Gradients, Optimizer, apply_gradients, make_optimizer
from app.services.replay import ReplayBuffer, Transition
from app.util.random_streams import RandomStreams, Stream


def dqn_act(
    q_net: DenseNetwork,
    state: np.ndarray,
    epsilon: float,
    grid: AllocationGrid,
    rng: np.random.Generator,
) -> Allocation:
    """ε-greedy; the greedy branch takes the lowest index among tied maxima."""
    count = action_count(grid)
    if q_net.layer_dims[-1] != count:
        raise ShapeError(f"network has {q_net.layer_dims[-1]} outputs for {count} actions")
    if rng.random() < epsilon:
        return allocation_at(int(rng.integers(count)), grid)
    return allocation_at(int(np.argmax(q_net.forward(state))), grid)


def dqn_loss_and_gradients(
    q_net: DenseNetwork,
    target: DenseNetwork,
    minibatch: Sequence[Transition],
    gamma: float,
    grid: AllocationGrid,
) -> tuple[float, Gradients]:
    if not minibatch:
        raise ArgumentError("minibatch is empty")
    states = np.stack([t.state for t in minibatch])
    next_states = np.stack([t.next_state for t in minibatch])
    indices = np.asarray([action_index(t.action, grid) for t in minibatch])
    rewards = np.asarray([t.reward for t in minibatch], dtype=np.float64)

    targets = rewards + gamma * target.forward(next_states).max(axis=1)
    outputs, cache = q_net.forward_cached(states)
    rows = np.arange(len(minibatch))
    errors = targets - outputs[rows, indices]
    loss = float(np.mean(errors**2))
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss}")

    upstream = np.zeros_like(outputs)
    upstream[rows, indices] = -2.0 * errors / len(minibatch)
    grads, _ = q_net.backward(cache, upstream)
    return loss, grads


def dqn_train_step(
    q_net: DenseNetwork,
    target: DenseNetwork,
    minibatch: Sequence[Transition],
    optimizer: Optimizer,
    gamma: float,
    grid: AllocationGrid,
) -> float:
    loss, grads = dqn_loss_and_gradients(q_net, target, minibatch, gamma, grid)
    apply_gradients(q_net, optimizer, grads)
    return loss


class DqnAgent:
    name = "dqn"

    def __init__(
        self,
        config: AgentConfig,
        grid: AllocationGrid,
        observation_size: int,
        streams: RandomStreams,
    ) -> None:
        self.config = config
        self.grid = grid
        self.q_net = DenseNetwork.initialize(
            [observation_size, *config.hidden_sizes, action_count(grid)],
            streams.generator(Stream.NETWORK_INIT),
        )
        self.target = self.q_net.copy()
        self.optimizer = make_optimizer(config.optimizer, config.learning_rate)
        self.buffer = ReplayBuffer(config.buffer_capacity)
        self._exploration_rng = streams.generator(Stream.EXPLORATION)
        self._replay_rng = streams.generator(Stream.REPLAY)
        self._logger = logging.getLogger(self.__class__.__name__)

    def exploration_at(self, episode: int) -> float:
        return self.config.epsilon.value_at(episode)

    def act(self, observation: np.ndarray, episode: int) -> Allocation:
        return dqn_act(
            self.q_net, observation, self.exploration_at(episode), self.grid, self._exploration_rng
        )

    def greedy(self, observation: np.ndarray) -> Allocation:
        return allocation_at(int(np.argmax(self.q_net.forward(observation))), self.grid)

    def observe(self, transition: Transition) -> Optional[float]:
        self.buffer.push(transition)
        if len(self.buffer) < self.config.minibatch_size:
            return None
        minibatch = self.buffer.sample(self.config.minibatch_size, self._replay_rng)
        return dqn_train_step(
            self.q_net, self.target, minibatch, self.optimizer, self.config.discount, self.grid
        )

    def end_episode(self, episode: int) -> None:
        if (episode + 1) % self.config.target_sync_period == 0:
            self.target.load_from(self.q_net)
            self._logger.debug("target synced after episode %s", episode)

    def networks(self) -> dict[str, DenseNetwork]:
        return {"q": self.q_net}

    def load_networks(self, networks: dict[str, DenseNetwork]) -> None:
        q_net = networks["q"]
        if q_net.layer_dims[-1] != action_count(self.grid):
            raise ShapeError(
                f"checkpoint has {q_net.layer_dims[-1]} outputs, grid has {action_count(self.grid)} actions"
            )
        self.q_net = q_net
        self.target = q_net.copy()

"""Normalized advantage function agent over the discrete allocation lattice.

Q(s, a) = V(s) + A(s, a) with A(s, a) = -1/2 (a - mu(s))^T L L^T (a - mu(s)),
where L is lower triangular with an exponentiated diagonal. Actions are
bandwidth fractions of W; continuous proto-actions are projected onto the
lattice by nearest neighbour search.
"""

from __future__ import annotations

import logging

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from app.core.errors import ArgumentError, NumericError, ShapeError
from app.domain.learning import AgentConfig, NoiseSchedule
from app.domain.models import Allocation, AllocationGrid
from app.services.action_space import project_knn
from app.services.neural import (
    DenseNetwork,
    ForwardCache,
    Gradients,
    Optimizer,
    apply_parameter_update,
    make_optimizer,
)
from app.services.replay import ReplayBuffer, Transition
from app.util.random_streams import RandomStreams, Stream

HEAD_ROLES = ("trunk", "value", "policy", "factor")


def factor_entry_count(action_size: int) -> int:
    return action_size * (action_size + 1) // 2


def factor_matrix(raw: np.ndarray, action_size: int) -> np.ndarray:
    """Lower-triangular L from row-major tril entries; diagonal through exp."""
    values = np.atleast_2d(np.asarray(raw, dtype=np.float64))
    if values.shape[1] != factor_entry_count(action_size):
        raise ShapeError(
            f"{values.shape[1]} factor entries cannot fill a {action_size}x{action_size} triangle"
        )
    rows, cols = np.tril_indices(action_size)
    diagonal = rows == cols
    values = values.copy()
    values[:, diagonal] = np.exp(values[:, diagonal])
    matrix = np.zeros((values.shape[0], action_size, action_size))
    matrix[:, rows, cols] = values
    return matrix[0] if np.ndim(raw) == 1 else matrix


@dataclass
class HeadOutputs:
    value: np.ndarray  # (B,)
    mu: np.ndarray  # (B, N)
    factor: np.ndarray  # (B, N, N)
    caches: dict[str, ForwardCache]


class NafHeads:
    """Shared trunk feeding the value, policy and factor heads."""

    def __init__(
        self,
        trunk: DenseNetwork,
        value_head: DenseNetwork,
        policy_head: DenseNetwork,
        factor_head: DenseNetwork,
    ) -> None:
        hidden = trunk.layer_dims[-1]
        action_size = policy_head.layer_dims[-1]
        for role, head in (("value", value_head), ("policy", policy_head), ("factor", factor_head)):
            if head.layer_dims[0] != hidden:
                raise ShapeError(f"{role} head expects {head.layer_dims[0]} inputs, trunk emits {hidden}")
        if value_head.layer_dims[-1] != 1:
            raise ShapeError("value head must emit a scalar")
        if factor_head.layer_dims[-1] != factor_entry_count(action_size):
            raise ShapeError(
                f"factor head emits {factor_head.layer_dims[-1]} entries, "
                f"expected {factor_entry_count(action_size)}"
            )
        self.trunk = trunk
        self.value_head = value_head
        self.policy_head = policy_head
        self.factor_head = factor_head

    @classmethod
    def initialize(
        cls,
        observation_size: int,
        action_size: int,
        hidden_sizes: Sequence[int],
        rng: np.random.Generator,
    ) -> "NafHeads":
        trunk = DenseNetwork.initialize(
            [observation_size, *hidden_sizes], rng, output_activation="relu"
        )
        hidden = hidden_sizes[-1]
        return cls(
            trunk,
            DenseNetwork.initialize([hidden, 1], rng),
            DenseNetwork.initialize([hidden, action_size], rng),
            DenseNetwork.initialize([hidden, factor_entry_count(action_size)], rng),
        )

    @classmethod
    def from_networks(cls, networks: dict[str, DenseNetwork]) -> "NafHeads":
        return cls(networks["trunk"], networks["value"], networks["policy"], networks["factor"])

    @property
    def observation_size(self) -> int:
        return self.trunk.layer_dims[0]

    @property
    def action_size(self) -> int:
        return self.policy_head.layer_dims[-1]

    def networks(self) -> dict[str, DenseNetwork]:
        return {
            "trunk": self.trunk,
            "value": self.value_head,
            "policy": self.policy_head,
            "factor": self.factor_head,
        }

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for net in self.networks().values():
            params.extend(net.parameters())
        return params

    def copy(self) -> "NafHeads":
        return NafHeads.from_networks({role: net.copy() for role, net in self.networks().items()})

    def load_from(self, other: "NafHeads") -> None:
        for role, net in self.networks().items():
            net.load_from(other.networks()[role])

    def evaluate(self, states: np.ndarray) -> HeadOutputs:
        batch = np.atleast_2d(np.asarray(states, dtype=np.float64))
        if batch.shape[1] != self.observation_size:
            raise ShapeError(f"observation has {batch.shape[1]} entries, expected {self.observation_size}")
        hidden, trunk_cache = self.trunk.forward_cached(batch)
        value, value_cache = self.value_head.forward_cached(hidden)
        mu, policy_cache = self.policy_head.forward_cached(hidden)
        raw, factor_cache = self.factor_head.forward_cached(hidden)
        return HeadOutputs(
            value=value[:, 0],
            mu=mu,
            factor=factor_matrix(raw, self.action_size),
            caches={
                "trunk": trunk_cache,
                "value": value_cache,
                "policy": policy_cache,
                "factor": factor_cache,
            },
        )

    def value(self, states: np.ndarray) -> np.ndarray:
        return self.evaluate(states).value

    def mu(self, state: np.ndarray) -> np.ndarray:
        return self.evaluate(state).mu[0]


def _quadratic(mu: np.ndarray, factor: np.ndarray, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advantage per row plus the offsets d = a - mu and z = L^T d."""
    offsets = actions - mu
    projected = np.einsum("bij,bi->bj", factor, offsets)
    return -0.5 * np.einsum("bj,bj->b", projected, projected), offsets, projected


def _action_vector(heads: NafHeads, action: np.ndarray) -> np.ndarray:
    vector = np.asarray(action, dtype=np.float64)
    if vector.shape != (heads.action_size,):
        raise ShapeError(f"action has shape {vector.shape}, expected ({heads.action_size},)")
    return vector


def advantage(heads: NafHeads, state: np.ndarray, action: np.ndarray) -> float:
    outputs = heads.evaluate(state)
    vector = _action_vector(heads, action)
    return float(_quadratic(outputs.mu, outputs.factor, vector[np.newaxis, :])[0][0])


def q_value(heads: NafHeads, state: np.ndarray, action: np.ndarray) -> float:
    outputs = heads.evaluate(state)
    vector = _action_vector(heads, action)
    adv = _quadratic(outputs.mu, outputs.factor, vector[np.newaxis, :])[0][0]
    return float(outputs.value[0] + adv)


def candidate_q_values(heads: NafHeads, state: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Q(s, a) for one state against a stack of normalized actions."""
    outputs = heads.evaluate(state)
    candidates = np.atleast_2d(np.asarray(actions, dtype=np.float64))
    count = candidates.shape[0]
    adv = _quadratic(
        np.repeat(outputs.mu, count, axis=0),
        np.repeat(outputs.factor, count, axis=0),
        candidates,
    )[0]
    return outputs.value[0] + adv


def _normalized(allocation: Allocation, grid: AllocationGrid) -> np.ndarray:
    return np.asarray(allocation.fractions(grid.total_units), dtype=np.float64)


def act(
    heads: NafHeads,
    state: np.ndarray,
    t: int,
    schedule: NoiseSchedule,
    grid: AllocationGrid,
    rng: np.random.Generator,
) -> tuple[np.ndarray, Allocation]:
    """Noisy proto-action (normalized) and its nearest lattice allocation."""
    proto = heads.mu(state) + schedule.sample(rng, heads.action_size, t)
    chosen = project_knn(proto * grid.total_bandwidth, grid, 1)[0]
    return proto, chosen


def act_wolpertinger(
    heads: NafHeads,
    state: np.ndarray,
    grid: AllocationGrid,
    k: int,
    proto: Optional[np.ndarray] = None,
) -> Allocation:
    """Best of the k lattice points nearest the proto-action, ranked by Q.

    Ties keep the candidate that came first in distance order.
    """
    if k < 1:
        raise ArgumentError("k must be positive")
    point = heads.mu(state) if proto is None else np.asarray(proto, dtype=np.float64)
    candidates = project_knn(point * grid.total_bandwidth, grid, k)
    if len(candidates) == 1:
        return candidates[0]
    q = candidate_q_values(heads, state, np.stack([_normalized(c, grid) for c in candidates]))
    return candidates[int(np.argmax(q))]


def naf_loss_and_gradients(
    heads: NafHeads,
    target_heads: NafHeads,
    minibatch: Sequence[Transition],
    gamma: float,
    grid: AllocationGrid,
) -> tuple[float, Gradients]:
    """Mean squared TD error and its gradient, aligned with heads.parameters()."""
    if not minibatch:
        raise ArgumentError("minibatch is empty")
    states = np.stack([t.state for t in minibatch])
    next_states = np.stack([t.next_state for t in minibatch])
    actions = np.stack([_normalized(t.action, grid) for t in minibatch])
    rewards = np.asarray([t.reward for t in minibatch], dtype=np.float64)

    targets = rewards + gamma * target_heads.value(next_states)
    outputs = heads.evaluate(states)
    adv, offsets, projected = _quadratic(outputs.mu, outputs.factor, actions)
    errors = targets - (outputs.value + adv)
    loss = float(np.mean(errors**2))
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss}")

    batch = len(minibatch)
    coef = -2.0 * errors / batch  # dLoss/dQ per row

    # dA/dmu = L z ; dA/dL_ij = -d_i z_j on the lower triangle
    grad_mu = coef[:, np.newaxis] * np.einsum("bij,bj->bi", outputs.factor, projected)
    rows, cols = np.tril_indices(heads.action_size)
    grad_raw = -offsets[:, rows] * projected[:, cols]
    diagonal = rows == cols
    grad_raw[:, diagonal] *= outputs.factor[:, rows[diagonal], cols[diagonal]]
    grad_raw *= coef[:, np.newaxis]

    value_grads, hidden_from_value = heads.value_head.backward(
        outputs.caches["value"], coef[:, np.newaxis]
    )
    policy_grads, hidden_from_policy = heads.policy_head.backward(outputs.caches["policy"], grad_mu)
    factor_grads, hidden_from_factor = heads.factor_head.backward(outputs.caches["factor"], grad_raw)
    trunk_grads, _ = heads.trunk.backward(
        outputs.caches["trunk"], hidden_from_value + hidden_from_policy + hidden_from_factor
    )
    return loss, trunk_grads + value_grads + policy_grads + factor_grads


def train_step(
    heads: NafHeads,
    target_heads: NafHeads,
    minibatch: Sequence[Transition],
    optimizer: Optimizer,
    gamma: float,
    grid: AllocationGrid,
) -> float:
    loss, grads = naf_loss_and_gradients(heads, target_heads, minibatch, gamma, grid)
    apply_parameter_update(heads.parameters(), optimizer, grads)
    return loss


def sync_target(heads: NafHeads, target_heads: NafHeads) -> None:
    target_heads.load_from(heads)


class NafAgent:
    """Replay-trained NAF learner with a periodically cloned target."""

    name = "dnaf"

    def __init__(
        self,
        config: AgentConfig,
        grid: AllocationGrid,
        observation_size: int,
        streams: RandomStreams,
    ) -> None:
        self.config = config
        self.grid = grid
        self.heads = NafHeads.initialize(
            observation_size,
            grid.slice_count,
            config.hidden_sizes,
            streams.generator(Stream.NETWORK_INIT),
        )
        self.target_heads = self.heads.copy()
        self.optimizer = make_optimizer(config.optimizer, config.learning_rate)
        self.buffer = ReplayBuffer(config.buffer_capacity)
        self.last_proto: Optional[np.ndarray] = None
        self._exploration_rng = streams.generator(Stream.EXPLORATION)
        self._replay_rng = streams.generator(Stream.REPLAY)
        self._logger = logging.getLogger(self.__class__.__name__)

    def exploration_at(self, episode: int) -> float:
        return self.config.noise.scale_at(episode)

    def act(self, observation: np.ndarray, episode: int) -> Allocation:
        proto, chosen = act(
            self.heads, observation, episode, self.config.noise, self.grid, self._exploration_rng
        )
        self.last_proto = proto
        if self.config.knn_k > 1:
            chosen = act_wolpertinger(self.heads, observation, self.grid, self.config.knn_k, proto)
        return chosen

    def greedy(self, observation: np.ndarray) -> Allocation:
        return act_wolpertinger(self.heads, observation, self.grid, self.config.knn_k)

    def observe(self, transition: Transition) -> Optional[float]:
        self.buffer.push(transition)
        if len(self.buffer) < self.config.minibatch_size:
            return None
        minibatch = self.buffer.sample(self.config.minibatch_size, self._replay_rng)
        return train_step(
            self.heads,
            self.target_heads,
            minibatch,
            self.optimizer,
            self.config.discount,
            self.grid,
        )

    def end_episode(self, episode: int) -> None:
        if (episode + 1) % self.config.target_sync_period == 0:
            sync_target(self.heads, self.target_heads)
            self._logger.debug("target synced after episode %s", episode)

    def networks(self) -> dict[str, DenseNetwork]:
        return self.heads.networks()

    def load_networks(self, networks: dict[str, DenseNetwork]) -> None:
        self.heads = NafHeads.from_networks(networks)
        if self.heads.action_size != self.grid.slice_count:
            raise ShapeError(
                f"checkpoint acts on {self.heads.action_size} slices, grid has {self.grid.slice_count}"
            )
        self.target_heads = self.heads.copy()

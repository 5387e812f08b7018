"""Training and evaluation loops that drive an agent through the environment."""

from __future__ import annotations

import logging

from typing import Any, Optional, Protocol, Sequence

import numpy as np

from app.core.errors import SlicingError, TrainingError
from app.domain.models import Allocation, EpisodeMetrics, RunSummary
from app.services.analysis import convergence_episode, final_window_mean
from app.services.neural import DenseNetwork
from app.services.replay import Transition
from app.services.slicing_env import SlicingEnv
from app.util.constants import DEFAULT_FINAL_WINDOW

logger = logging.getLogger(__name__)


class MetricsSink(Protocol):
    def write(self, metrics: EpisodeMetrics) -> None: ...


class Agent(Protocol):
    name: str

    def exploration_at(self, episode: int) -> float: ...

    def act(self, observation: np.ndarray, episode: int) -> Allocation: ...

    def greedy(self, observation: np.ndarray) -> Allocation: ...

    def observe(self, transition: Transition) -> Optional[float]: ...

    def end_episode(self, episode: int) -> None: ...

    def networks(self) -> dict[str, DenseNetwork]: ...


def run_training(
    env: SlicingEnv,
    agent: Agent,
    episodes: int,
    seed: int,
    sinks: Sequence[MetricsSink] = (),
    *,
    log_every: int = 0,
) -> list[EpisodeMetrics]:
    """Observe, act, step, store, train and sync until the episode budget is spent."""
    log: list[EpisodeMetrics] = []
    if episodes <= 0:
        return log

    observation = env.reset(seed)
    cumulative = 0.0
    for episode in range(episodes):
        try:
            exploration = agent.exploration_at(episode)
            action = agent.act(observation, episode)
            result = env.step(action)
            loss = agent.observe(
                Transition(
                    state=observation,
                    action=action,
                    reward=result.reward,
                    next_state=result.next_observation,
                )
            )
            agent.end_episode(episode)
        except SlicingError as exc:
            raise TrainingError(str(exc), episode=episode, cause=exc) from exc

        cumulative += result.reward
        metrics = result.metrics.model_copy(
            update={"exploration": exploration, "loss": loss, "cumulative_reward": cumulative}
        )
        for sink in sinks:
            sink.write(metrics)
        log.append(metrics)
        observation = result.next_observation

        if log_every and (episode + 1) % log_every == 0:
            logger.info(
                "%s episode %s: reward=%.4f se=%.4f qoe=%.4f exploration=%.4f loss=%s",
                agent.name,
                episode,
                metrics.reward,
                metrics.se,
                metrics.qoe_aggregate,
                exploration,
                "-" if loss is None else f"{loss:.6f}",
            )
    return log


def run_evaluation(
    env: SlicingEnv,
    agent: Agent,
    episodes: int,
    seed: int,
    sinks: Sequence[MetricsSink] = (),
) -> list[EpisodeMetrics]:
    """Greedy, noise-free rollout; nothing is stored or trained."""
    log: list[EpisodeMetrics] = []
    if episodes <= 0:
        return log

    observation = env.reset(seed)
    cumulative = 0.0
    for episode in range(episodes):
        try:
            result = env.step(agent.greedy(observation))
        except SlicingError as exc:
            raise TrainingError(str(exc), episode=episode, cause=exc) from exc
        cumulative += result.reward
        metrics = result.metrics.model_copy(update={"cumulative_reward": cumulative})
        for sink in sinks:
            sink.write(metrics)
        log.append(metrics)
        observation = result.next_observation
    return log


def summarize_run(
    agent_name: str,
    seed: int,
    log: Sequence[EpisodeMetrics],
    *,
    slice_names: Sequence[str],
    final_window: int = DEFAULT_FINAL_WINDOW,
    wall_clock_s: float = 0.0,
    config: Optional[dict[str, Any]] = None,
) -> RunSummary:
    rewards = [m.reward for m in log]
    tail = log[-final_window:] if log else []
    losses = [m.loss for m in log if m.loss is not None]
    return RunSummary(
        agent=agent_name,
        seed=seed,
        episodes=len(log),
        final_window=final_window,
        final_mean_reward=final_window_mean(rewards, final_window),
        final_mean_se=final_window_mean([m.se for m in log], final_window),
        final_mean_qoe={
            name: float(np.mean([m.qoe[name] for m in tail])) for name in slice_names
        }
        if tail
        else {},
        cumulative_reward=log[-1].cumulative_reward if log else 0.0,
        convergence_episode=convergence_episode(rewards, final_window=final_window),
        last_loss=losses[-1] if losses else None,
        wall_clock_s=wall_clock_s,
        config=config or {},
    )

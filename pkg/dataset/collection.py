"""
Demonstration-free offline collection with random bounded-delta actions.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from envs import ContactEnv, EnvConfig
from models import TaskKind, Transition, Trajectory, Dataset
from utils.error_handler import with_error_handling, ErrorType
from utils.structured_logger import log_collection_episode, get_structured_logger
from .sampling import sample_action_delta, quantize_action, DEFAULT_ETA

logger = logging.getLogger(__name__)

_ACTION_STREAM = 7


def episode_seed(seed: int, episode_index: int) -> int:
    """Per-episode seed: seed XOR episode index."""
    return (int(seed) ^ int(episode_index)) & 0xFFFFFFFFFFFFFFFF


def compute_mc_returns(rewards, dones, gamma: float) -> np.ndarray:
    """
    Discounted returns G_t = r_t + gamma * (1 - d_t) * G_{t+1}, truncated at
    the horizon end. Steps after a terminal carry reward 0 and done 1, so
    their returns are 0. Works on a single (T,) trajectory or a (B, T) batch.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if rewards.shape != dones.shape:
        raise ValueError(f"rewards {rewards.shape} and dones {dones.shape} differ")
    returns = np.zeros_like(rewards)
    running = np.zeros(rewards.shape[:-1])
    for t in range(rewards.shape[-1] - 1, -1, -1):
        running = rewards[..., t] + gamma * (1.0 - dones[..., t]) * running
        returns[..., t] = running
    after_terminal = (np.cumsum(dones > 0.5, axis=-1) - (dones > 0.5)) > 0
    returns[after_terminal] = 0.0
    return returns


def truncation_bias_bound(t: int, horizon: int, gamma: float, r_max: float) -> float:
    """Upper bound on |G_t(infinite) - G_t(truncated at horizon)| for |r| <= r_max."""
    return gamma ** (horizon - t) * r_max / (1.0 - gamma)


def collect_episode(task: TaskKind, seed: int, steps: int, env_config: EnvConfig,
                    gamma: float, eta: float = DEFAULT_ETA) -> Trajectory:
    """Run one random-delta episode from the neutral action and pad it to `steps`."""
    env = ContactEnv(env_config.with_overrides(max_steps=steps))
    rng = np.random.default_rng([seed, _ACTION_STREAM])
    state, obs = env.reset(task, seed)
    prev = np.zeros(3, dtype=np.float32)
    transitions: List[Transition] = []
    for _ in range(steps):
        action = quantize_action(sample_action_delta(prev, rng, eta), prev, eta)
        result = env.step(state, action.astype(np.float64))
        transitions.append(Transition(obs.to_vector(), action, result.reward, result.done))
        state, obs, prev = result.state, result.observation, action
        if result.done or result.truncated:
            break
    trajectory = Trajectory.from_transitions(state.task, seed, transitions, steps)
    trajectory.mc_returns = compute_mc_returns(trajectory.rewards, trajectory.dones, gamma)
    return trajectory


def _collect_job(job: Tuple[str, int, int, dict, float, float]) -> Trajectory:
    task_value, seed, steps, env_kv, gamma, eta = job
    return collect_episode(TaskKind(task_value), seed, steps, EnvConfig.from_kv(env_kv), gamma, eta)


@with_error_handling(ErrorType.ENVIRONMENT)
def collect(task: TaskKind, episodes: int, steps: int, seed: int,
            env_config: Optional[EnvConfig] = None,
            gamma: float = 0.95,
            eta: float = DEFAULT_ETA,
            workers: int = 1) -> Dataset:
    """
    Collect `episodes` trajectories of length `steps`.

    Episode i uses seed ^ i, so the result is identical for any worker count.
    """
    env_config = env_config or EnvConfig()
    jobs = [(task.value, episode_seed(seed, i), steps, env_config.to_kv(), gamma, eta) for i in range(episodes)]
    slog = get_structured_logger("dataset")
    started = time.perf_counter()

    with slog.performance_timer("collect", task=task.value, episodes=episodes, workers=workers):
        if workers > 1 and episodes > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                trajectories = list(pool.map(_collect_job, jobs, chunksize=max(1, episodes // (4 * workers))))
        else:
            trajectories = [_collect_job(job) for job in jobs]

    for i, tr in enumerate(trajectories):
        log_collection_episode(tr.task.value, i, tr.length, tr.episode_return, tr.terminated)
    logger.info("Collected %d %s episodes (%d steps) in %.1fs",
                episodes, task.value, sum(tr.length for tr in trajectories), time.perf_counter() - started)
    return Dataset.from_trajectories(trajectories, gamma, env_config.config_hash())


def returns_match(dataset: Dataset, atol: float = 1e-12) -> bool:
    """Recompute MC returns from stored rewards and compare with the stored ones."""
    recomputed = compute_mc_returns(dataset.rewards, dataset.dones, dataset.header.gamma)
    return bool(np.allclose(recomputed, dataset.mc_returns, rtol=0.0, atol=atol))

"""
Closed-loop evaluation: reset, act, step until termination or the time limit.
"""

import logging
import time
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Sequence, TYPE_CHECKING

import numpy as np

from envs import ContactEnv
from models import TaskKind, OBS_DIM
from utils.csv_io import write_csv
from utils.error_handler import IncompatibleModelError, with_error_handling, ErrorType
from utils.rng import stream_key

if TYPE_CHECKING:
    from agents import BaseAgent

logger = logging.getLogger(__name__)

_EVAL_STREAM = 101

EPISODE_COLUMNS = ["episode", "return", "steps", "terminated", "mean_latency_ms"]
SUMMARY_COLUMNS = ["episodes", "mean_return", "std_return", "termination_rate",
                   "latency_p50_ms", "latency_p95_ms"]


def evaluation_seed(seed: int, episode: int) -> int:
    """Env seed of an evaluation episode; disjoint from the collection seeds (seed ^ i)."""
    return stream_key(seed, _EVAL_STREAM, episode)


@dataclass
class EpisodeMetrics:
    task: str
    seed: int
    episode: int
    episode_return: float
    steps: int
    terminated: bool
    latencies_ms: List[float] = field(default_factory=list, repr=False)

    @property
    def mean_latency_ms(self) -> float:
        return float(np.mean(self.latencies_ms)) if self.latencies_ms else 0.0

    def row(self) -> List[Any]:
        return [self.episode, self.episode_return, self.steps, self.terminated, self.mean_latency_ms]

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop('latencies_ms')
        data['mean_latency_ms'] = self.mean_latency_ms
        return data


@dataclass
class LoopSummary:
    """Aggregate over episodes: mean and std of return, termination rate, per-step latency percentiles."""
    episodes: List[EpisodeMetrics]

    @property
    def returns(self) -> np.ndarray:
        return np.array([e.episode_return for e in self.episodes], dtype=np.float64)

    @property
    def mean_return(self) -> float:
        return float(self.returns.mean()) if self.episodes else 0.0

    @property
    def std_return(self) -> float:
        return float(self.returns.std()) if self.episodes else 0.0

    @property
    def termination_rate(self) -> float:
        return float(np.mean([e.terminated for e in self.episodes])) if self.episodes else 0.0

    def latency_percentile(self, q: float) -> float:
        latencies = [v for e in self.episodes for v in e.latencies_ms]
        return float(np.percentile(latencies, q)) if latencies else 0.0

    def row(self) -> List[Any]:
        return [len(self.episodes), self.mean_return, self.std_return, self.termination_rate,
                self.latency_percentile(50), self.latency_percentile(95)]

    def to_dict(self) -> Dict[str, Any]:
        return dict(zip(SUMMARY_COLUMNS, self.row()))

    def merged(self, other: "LoopSummary") -> "LoopSummary":
        return LoopSummary(self.episodes + other.episodes)


def run_episode(env: ContactEnv, agent: "BaseAgent", task: TaskKind, seed: int,
                episode: int = 0, max_steps: Optional[int] = None) -> EpisodeMetrics:
    """One episode; latency is measured around each act() call."""
    max_steps = max_steps or env.config.max_steps
    state, observation = env.reset(task, seed)
    agent.reset(observation, episode_seed=seed)
    total, latencies, steps = 0.0, [], 0
    terminated = False
    while steps < max_steps and not state.finished:
        started = time.perf_counter()
        action = agent.act(observation)
        latencies.append((time.perf_counter() - started) * 1000.0)
        result = env.step(state, action)
        total += result.reward
        steps += 1
        state, observation = result.state, result.observation
        terminated = result.done
    return EpisodeMetrics(task=state.task.value, seed=int(seed), episode=episode,
                          episode_return=float(total), steps=steps, terminated=terminated,
                          latencies_ms=latencies)


def _check_agent(env: ContactEnv, agent: "BaseAgent") -> None:
    snapshot = getattr(agent, "snapshot", None)
    if snapshot is None:
        return
    if snapshot.config.obs_dim != OBS_DIM:
        raise IncompatibleModelError(
            f"model obs_dim {snapshot.config.obs_dim} != environment observation dim {OBS_DIM}")
    snapshot.check_env(env.config.config_hash().hex())


@with_error_handling(ErrorType.ENVIRONMENT)
def control_loop(env: ContactEnv, agent: "BaseAgent", task: TaskKind, episodes: int,
                 seed: int = 0, episode_offset: int = 0) -> LoopSummary:
    """
    Run `episodes` evaluation episodes. Episode i resets the env with
    evaluation_seed(seed, episode_offset + i), so paired agents see the same
    initial conditions.
    """
    _check_agent(env, agent)
    results: List[EpisodeMetrics] = []
    for i in range(episodes):
        index = episode_offset + i
        metrics = run_episode(env, agent, task, evaluation_seed(seed, index), episode=index)
        results.append(metrics)
        logger.info("episode %d (%s): return=%.3f steps=%d terminated=%s latency=%.1f ms",
                    index, metrics.task, metrics.episode_return, metrics.steps,
                    metrics.terminated, metrics.mean_latency_ms)
    summary = LoopSummary(results)
    logger.info("%d episodes: return %.3f +/- %.3f, termination rate %.2f",
                episodes, summary.mean_return, summary.std_return, summary.termination_rate)
    return summary


def write_episode_csv(path, episodes: Sequence[EpisodeMetrics]) -> int:
    return write_csv(path, EPISODE_COLUMNS, (e.row() for e in episodes))

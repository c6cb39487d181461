"""
Offline transition data in [Batch, Time, Data] layout.
"""

from dataclasses import dataclass, field, asdict
from typing import Dict, Any, List, Optional, Sequence

import numpy as np

from .env_types import TaskKind, OBS_DIM, ACTION_DIM

DATASET_VERSION = 1


@dataclass
class Transition:
    """(o_t, a_t, r_t, d_t): d_t = 1 when executing a_t ended the episode."""
    observation: np.ndarray
    action: np.ndarray
    reward: float
    done: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'observation': np.asarray(self.observation).tolist(),
            'action': np.asarray(self.action).tolist(),
            'reward': float(self.reward),
            'done': bool(self.done),
        }


@dataclass
class Trajectory:
    """
    One episode padded to a fixed length T.

    `length` counts the real transitions (terminal one included). Steps past
    it repeat the last observation and action with reward 0 and done 1.
    """
    task: TaskKind
    seed: int
    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    mc_returns: np.ndarray
    length: int

    @property
    def horizon(self) -> int:
        return int(self.rewards.shape[0])

    @property
    def terminated(self) -> bool:
        return bool(self.length > 0 and self.dones[self.length - 1] > 0.5)

    @property
    def episode_return(self) -> float:
        return float(np.sum(self.rewards[:self.length], dtype=np.float64))

    def valid_mask(self) -> np.ndarray:
        """1 where no done occurred strictly before t."""
        return valid_mask(self.dones)

    def transition(self, t: int) -> Transition:
        return Transition(self.observations[t], self.actions[t], float(self.rewards[t]), bool(self.dones[t] > 0.5))

    @classmethod
    def from_transitions(cls, task: TaskKind, seed: int, transitions: Sequence[Transition],
                         horizon: int, mc_returns: Optional[np.ndarray] = None) -> "Trajectory":
        """Stack transitions and pad to `horizon` after a terminal step."""
        if not transitions:
            raise ValueError("A trajectory needs at least one transition")
        if len(transitions) > horizon:
            raise ValueError(f"{len(transitions)} transitions exceed horizon {horizon}")
        length = len(transitions)
        obs = np.zeros((horizon, OBS_DIM), dtype=np.float32)
        act = np.zeros((horizon, ACTION_DIM), dtype=np.float32)
        rew = np.zeros(horizon, dtype=np.float32)
        done = np.zeros(horizon, dtype=np.float32)
        for t, tr in enumerate(transitions):
            obs[t] = tr.observation
            act[t] = tr.action
            rew[t] = tr.reward
            done[t] = 1.0 if tr.done else 0.0
        if length < horizon:
            obs[length:] = obs[length - 1]
            act[length:] = act[length - 1]
            done[length:] = 1.0
        if mc_returns is None:
            mc_returns = np.zeros(horizon, dtype=np.float64)
        return cls(task, int(seed), obs, act, rew, done, np.asarray(mc_returns, dtype=np.float64), length)


def valid_mask(dones: np.ndarray) -> np.ndarray:
    """Mask over the last axis: step t counts iff no done flag is set strictly before t."""
    dones = np.asarray(dones) > 0.5
    before = np.cumsum(dones, axis=-1) - dones
    return (before == 0).astype(np.float64)


@dataclass
class DatasetHeader:
    episodes: int
    horizon: int
    obs_dim: int = OBS_DIM
    act_dim: int = ACTION_DIM
    gamma: float = 0.95
    env_hash: bytes = b"\x00" * 8
    version: int = DATASET_VERSION

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['env_hash'] = self.env_hash.hex()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DatasetHeader":
        data = dict(data)
        if isinstance(data.get('env_hash'), str):
            data['env_hash'] = bytes.fromhex(data['env_hash'])
        return cls(**data)


@dataclass
class Dataset:
    """Header plus dense arrays: observations (B,T,obs), actions (B,T,act), rewards/dones/mc_returns (B,T)."""
    header: DatasetHeader
    tasks: np.ndarray
    seeds: np.ndarray
    lengths: np.ndarray
    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    mc_returns: np.ndarray

    def __len__(self) -> int:
        return int(self.tasks.shape[0])

    @property
    def masks(self) -> np.ndarray:
        return valid_mask(self.dones)

    def trajectory(self, index: int) -> Trajectory:
        return Trajectory(
            task=TaskKind.from_code(int(self.tasks[index])),
            seed=int(self.seeds[index]),
            observations=self.observations[index],
            actions=self.actions[index],
            rewards=self.rewards[index],
            dones=self.dones[index],
            mc_returns=self.mc_returns[index],
            length=int(self.lengths[index]),
        )

    def trajectories(self) -> List[Trajectory]:
        return [self.trajectory(i) for i in range(len(self))]

    def task_counts(self) -> Dict[str, int]:
        counts = {kind.value: 0 for kind in TaskKind.concrete()}
        for code in self.tasks:
            counts[TaskKind.from_code(int(code)).value] += 1
        return counts

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        header = DatasetHeader(**{**asdict(self.header), 'episodes': int(len(indices))})
        return Dataset(header, self.tasks[indices], self.seeds[indices], self.lengths[indices],
                       self.observations[indices], self.actions[indices], self.rewards[indices],
                       self.dones[indices], self.mc_returns[indices])

    @classmethod
    def from_trajectories(cls, trajectories: Sequence[Trajectory], gamma: float,
                          env_hash: bytes = b"\x00" * 8) -> "Dataset":
        if not trajectories:
            raise ValueError("A dataset needs at least one trajectory")
        horizon = trajectories[0].horizon
        if any(tr.horizon != horizon for tr in trajectories):
            raise ValueError("All trajectories must share the same horizon")
        header = DatasetHeader(episodes=len(trajectories), horizon=horizon, gamma=float(gamma), env_hash=env_hash)
        return cls(
            header=header,
            tasks=np.array([tr.task.code for tr in trajectories], dtype=np.uint8),
            seeds=np.array([tr.seed for tr in trajectories], dtype=np.uint64),
            lengths=np.array([tr.length for tr in trajectories], dtype=np.uint32),
            observations=np.stack([tr.observations for tr in trajectories]).astype(np.float32),
            actions=np.stack([tr.actions for tr in trajectories]).astype(np.float32),
            rewards=np.stack([tr.rewards for tr in trajectories]).astype(np.float32),
            dones=np.stack([tr.dones for tr in trajectories]).astype(np.float32),
            mc_returns=np.stack([tr.mc_returns for tr in trajectories]).astype(np.float64),
        )

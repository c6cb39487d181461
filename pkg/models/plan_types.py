"""
Planner records: configuration, scored candidate batches and plan results.
"""

from dataclasses import dataclass, field, asdict, replace
from enum import Enum
from typing import Dict, Any, List, Mapping, Optional

import numpy as np


class Objective(Enum):
    """Candidate scoring rule"""
    JAVG = "javg"
    REW = "rew"
    TD = "td"

    @property
    def needs_reward_head(self) -> bool:
        return self in (Objective.REW, Objective.TD)


class NoiseMode(Enum):
    """How imagined latents are drawn from the prior"""
    SAMPLED = "sampled"
    MEAN = "mean"


@dataclass(frozen=True)
class PlanConfig:
    num_candidates: int = 1024
    horizon: int = 4
    cem_iterations: int = 6
    elites: int = 64
    init_std: float = 0.32
    min_std: float = 0.02
    termination_threshold: float = 0.9
    objective: Objective = Objective.JAVG
    gamma: float = 0.95
    noise_mode: NoiseMode = NoiseMode.SAMPLED
    mask_trigger_step: bool = False
    precision: str = "float32"
    chunk_size: int = 256
    workers: int = 1
    seed: int = 0

    @property
    def dtype(self):
        return np.float32 if self.precision == "float32" else np.float64

    def with_overrides(self, **changes) -> "PlanConfig":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['objective'] = self.objective.value
        data['noise_mode'] = self.noise_mode.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PlanConfig":
        data = dict(data)
        if isinstance(data.get('objective'), str):
            data['objective'] = Objective(data['objective'])
        if isinstance(data.get('noise_mode'), str):
            data['noise_mode'] = NoiseMode(data['noise_mode'])
        return cls(**data)

    @classmethod
    def from_run_config(cls, run: Mapping[str, Any]) -> "PlanConfig":
        """Build from resolved `plan.*` keys plus `run.seed`."""
        values = {key[len("plan."):]: value for key, value in run.items() if key.startswith("plan.")}
        values['seed'] = int(run.get("run.seed", 0))
        return cls.from_dict(values)


@dataclass
class CandidateBatch:
    """M candidate sequences of N actions with their per-step predictions and scores."""
    actions: np.ndarray
    q_hat: np.ndarray
    d_hat: np.ndarray
    masked_q: np.ndarray
    score: np.ndarray
    r_hat: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return int(self.actions.shape[0])

    def best_index(self) -> int:
        return int(np.argmax(self.score))


@dataclass
class PlanResult:
    """Best-ever sequence found by CEM; only `action` (its first element) is executed."""
    action: np.ndarray
    sequence: np.ndarray
    score: float
    mean: np.ndarray
    std: np.ndarray
    elite_trace: List[float] = field(default_factory=list)

    def __post_init__(self):
        self.sequence = np.asarray(self.sequence)
        self.action = np.array(self.sequence[0], copy=True)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'action': self.action.tolist(),
            'sequence': self.sequence.tolist(),
            'score': float(self.score),
            'mean': self.mean.tolist(),
            'std': self.std.tolist(),
            'elite_trace': list(self.elite_trace),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PlanResult":
        return cls(
            action=np.array(data['action']),
            sequence=np.array(data['sequence']),
            score=float(data['score']),
            mean=np.array(data['mean']),
            std=np.array(data['std']),
            elite_trace=list(data.get('elite_trace', [])),
        )

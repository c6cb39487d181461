"""
Environment records: task kinds, actions, simulator state, observations and step results.
"""

from dataclasses import dataclass, field, asdict, replace
from enum import Enum
from typing import Dict, Any, Tuple, Optional

import numpy as np

ACTION_DIM = 3
NUM_RAYS = 32
PROPRIO_DIM = 5 + ACTION_DIM
OBS_DIM = NUM_RAYS + PROPRIO_DIM


class TaskKind(Enum):
    """Concrete tasks plus the Mixed pseudo-task used for collection and multi-task evaluation."""
    WALL = "wall"
    BALL = "ball"
    ARCH = "arch"
    MIXED = "mixed"

    @property
    def code(self) -> int:
        return _TASK_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "TaskKind":
        for kind, value in _TASK_CODES.items():
            if value == code:
                return kind
        raise ValueError(f"Unknown task code {code}")

    @classmethod
    def parse(cls, text: str) -> "TaskKind":
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise ValueError(f"Unknown task '{text}', expected one of {[k.value for k in cls]}")

    @classmethod
    def concrete(cls) -> Tuple["TaskKind", ...]:
        return (cls.WALL, cls.BALL, cls.ARCH)


_TASK_CODES = {TaskKind.WALL: 0, TaskKind.BALL: 1, TaskKind.ARCH: 2, TaskKind.MIXED: 3}


@dataclass(frozen=True)
class Action:
    """Normalized command [hand_x, hand_z, body_height], every component in [-1, 1]."""
    hand_x: float = 0.0
    hand_z: float = 0.0
    body_height: float = 0.0

    def __post_init__(self):
        for name in ("hand_x", "hand_z", "body_height"):
            object.__setattr__(self, name, float(np.clip(getattr(self, name), -1.0, 1.0)))

    def to_array(self) -> np.ndarray:
        return np.array([self.hand_x, self.hand_z, self.body_height], dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "Action":
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.shape != (ACTION_DIM,):
            raise ValueError(f"Action needs {ACTION_DIM} components, got {values.shape}")
        return cls(*values.tolist())

    @classmethod
    def neutral(cls) -> "Action":
        return cls(0.0, 0.0, 0.0)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Action":
        return cls(**data)


@dataclass(frozen=True)
class EnvState:
    """
    Full simulator state. Object fields that do not apply to `task` keep
    their defaults. Randomness is derived from (seed, counters), so the
    state alone determines every future step for a given action sequence.
    """
    task: TaskKind
    seed: int
    step_index: int = 0
    body_x: float = 0.0
    body_height: float = 0.6
    lean: float = 0.0
    lean_rate: float = 0.0
    hand_x: float = 0.3
    hand_z: float = 0.7
    prev_action: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    # wall
    wall_distance: float = 0.0
    impulses: Tuple[Tuple[int, float], ...] = ()
    # ball
    ball_x: float = 0.0
    ball_z: float = 0.0
    ball_speed: float = 0.0
    # arch
    arch_x: float = 0.0
    arch_clearance: float = 0.0
    respawns: int = 0
    done: bool = False
    truncated: bool = False

    @property
    def finished(self) -> bool:
        return self.done or self.truncated

    def evolve(self, **changes) -> "EnvState":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['task'] = self.task.value
        data['prev_action'] = list(self.prev_action)
        data['impulses'] = [list(item) for item in self.impulses]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EnvState":
        data = dict(data)
        data['task'] = TaskKind(data['task'])
        data['prev_action'] = tuple(float(v) for v in data['prev_action'])
        data['impulses'] = tuple((int(s), float(m)) for s, m in data.get('impulses', ()))
        return cls(**data)


@dataclass
class Observation:
    """32 ray depths plus proprioception [hand_x, hand_z, body_height, lean, lean_rate, prev_action(3)]."""
    depth: np.ndarray
    proprio: np.ndarray

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float64)
        self.proprio = np.asarray(self.proprio, dtype=np.float64)
        if self.depth.shape != (NUM_RAYS,) or self.proprio.shape != (PROPRIO_DIM,):
            raise ValueError(f"Observation expects depth ({NUM_RAYS},) and proprio ({PROPRIO_DIM},), "
                             f"got {self.depth.shape} and {self.proprio.shape}")

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.depth, self.proprio])

    @classmethod
    def from_vector(cls, vector) -> "Observation":
        vector = np.asarray(vector, dtype=np.float64)
        return cls(depth=vector[:NUM_RAYS], proprio=vector[NUM_RAYS:])

    def to_dict(self) -> Dict[str, Any]:
        return {'depth': self.depth.tolist(), 'proprio': self.proprio.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Observation":
        return cls(depth=data['depth'], proprio=data['proprio'])


@dataclass
class StepResult:
    """Outcome of one env step; `done` is failure termination only, time limits set `truncated`."""
    state: EnvState
    observation: Observation
    reward: float
    done: bool
    truncated: bool = False
    info: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'state': self.state.to_dict(),
            'observation': self.observation.to_dict(),
            'reward': self.reward,
            'done': self.done,
            'truncated': self.truncated,
            'info': dict(self.info),
        }

"""
World-model records: latent planning state and the per-term loss breakdown.
"""

from dataclasses import dataclass, asdict
from typing import Dict, Any, Optional, List

import numpy as np


@dataclass
class LatentState:
    """Deterministic recurrent state h plus stochastic latent z (single or batched)."""
    h: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        self.h = np.asarray(self.h)
        self.z = np.asarray(self.z)

    @classmethod
    def zeros(cls, h_dim: int, z_dim: int, batch: Optional[int] = None, dtype=np.float64) -> "LatentState":
        lead = () if batch is None else (batch,)
        return cls(np.zeros(lead + (h_dim,), dtype=dtype), np.zeros(lead + (z_dim,), dtype=dtype))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.h)) and np.all(np.isfinite(self.z)))

    def astype(self, dtype) -> "LatentState":
        return LatentState(self.h.astype(dtype), self.z.astype(dtype))

    def to_dict(self) -> Dict[str, Any]:
        return {'h': self.h.tolist(), 'z': self.z.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LatentState":
        return cls(np.array(data['h']), np.array(data['z']))


LOSS_COLUMNS = ["total", "rec_obs", "rec_term", "jep", "q"]


@dataclass
class LossBreakdown:
    """total = rec_obs + rec_term + jep + q (+ reward when the reward head is trained)."""
    total: float
    rec_obs: float
    rec_term: float
    jep: float
    q: float
    reward: Optional[float] = None

    def parts_sum(self) -> float:
        return self.rec_obs + self.rec_term + self.jep + self.q + (self.reward or 0.0)

    def columns(self) -> List[str]:
        return LOSS_COLUMNS + (["reward"] if self.reward is not None else [])

    def values(self) -> List[float]:
        return [getattr(self, name) for name in self.columns()]

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if self.reward is None:
            data.pop('reward')
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LossBreakdown":
        return cls(**data)

    @classmethod
    def mean(cls, items: List["LossBreakdown"]) -> "LossBreakdown":
        """Average several breakdowns term by term (reward kept only if all carry it)."""
        if not items:
            raise ValueError("Cannot average an empty list of losses")
        has_reward = all(item.reward is not None for item in items)
        fields = LOSS_COLUMNS + (["reward"] if has_reward else [])
        means = {name: float(np.mean([getattr(item, name) for item in items])) for name in fields}
        return cls(**means)

"""
Adam with bias correction, over flat name -> array parameter dicts.
"""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from utils.error_handler import ShapeError


@dataclass
class AdamState:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Mapping[str, np.ndarray], **hyper) -> "AdamState":
        return cls(
            first_moment={k: np.zeros_like(v) for k, v in params.items()},
            second_moment={k: np.zeros_like(v) for k, v in params.items()},
            **hyper,
        )

    def copy(self) -> "AdamState":
        return AdamState(
            lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps, step=self.step,
            first_moment={k: v.copy() for k, v in self.first_moment.items()},
            second_moment={k: v.copy() for k, v in self.second_moment.items()},
        )


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_by_global_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> Tuple[Dict[str, np.ndarray], float]:
    """Scale all gradients together so their joint L2 norm is at most `max_norm`."""
    norm = global_norm(grads)
    if max_norm <= 0 or norm <= max_norm:
        return dict(grads), norm
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}, norm


def adam_step(state: AdamState,
              params: Mapping[str, np.ndarray],
              grads: Mapping[str, np.ndarray],
              max_grad_norm: Optional[float] = None) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One bias-corrected Adam update.

    Inputs are left untouched; returns (new_params, new_state) with
    new_state.step == state.step + 1.
    """
    if max_grad_norm is not None:
        grads, _ = clip_by_global_norm(grads, max_grad_norm)

    new_state = state.copy()
    new_state.step = state.step + 1
    t = new_state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    new_params = {}
    for name, theta in params.items():
        g = grads.get(name)
        if g is None:
            new_params[name] = theta.copy()
            continue
        if g.shape != theta.shape:
            raise ShapeError(f"adam_step: gradient for '{name}' has shape {g.shape}, parameter {theta.shape}")
        m = state.first_moment.get(name, np.zeros_like(theta))
        v = state.second_moment.get(name, np.zeros_like(theta))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        new_state.first_moment[name] = m
        new_state.second_moment[name] = v
        m_hat = m / correction1
        v_hat = v / correction2
        new_params[name] = theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, new_state

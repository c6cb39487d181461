"""
Termination masking and candidate scoring rules.

All functions work on (M, N) arrays: M candidates, N horizon steps.
"""

from typing import Optional, Tuple

import numpy as np

from models import Objective
from utils.error_handler import ShapeError


def first_trigger(d_hat: np.ndarray, threshold: float) -> np.ndarray:
    """Index of the first step with d_hat > threshold per candidate; N when it never triggers."""
    d_hat = np.asarray(d_hat)
    triggered = d_hat > threshold
    return np.where(triggered.any(axis=-1), np.argmax(triggered, axis=-1), d_hat.shape[-1])


def apply_termination_mask(values: np.ndarray, d_hat: np.ndarray, threshold: float,
                           include_trigger: bool = False) -> np.ndarray:
    """
    Zero every entry after the first step whose termination probability
    exceeds `threshold`. The triggering step itself is kept unless
    `include_trigger` is set.
    """
    values = np.asarray(values)
    d_hat = np.asarray(d_hat)
    if values.shape != d_hat.shape:
        raise ShapeError(f"values {values.shape} and d_hat {d_hat.shape} differ")
    trigger = first_trigger(d_hat, threshold)[..., None]
    steps = np.arange(values.shape[-1])
    keep = steps < trigger if include_trigger else steps <= trigger
    return np.where(keep, values, np.zeros((), dtype=values.dtype))


def objective_javg(masked_q: np.ndarray) -> np.ndarray:
    """Averaged surrogate value: mean over the horizon of the masked Q estimates."""
    return np.mean(masked_q, axis=-1)


def _discounts(horizon: int, gamma: float, dtype) -> np.ndarray:
    return (float(gamma) ** np.arange(horizon)).astype(dtype)


def objective_rew(r_hat: np.ndarray, d_hat: np.ndarray, gamma: float, threshold: float,
                  include_trigger: bool = False) -> np.ndarray:
    """Discounted sum of masked predicted rewards."""
    masked = apply_termination_mask(r_hat, d_hat, threshold, include_trigger)
    return masked @ _discounts(masked.shape[-1], gamma, masked.dtype)


def objective_td(r_hat: np.ndarray, q_hat: np.ndarray, d_hat: np.ndarray, gamma: float,
                 threshold: float, include_trigger: bool = False) -> np.ndarray:
    """
    Discounted predicted rewards plus gamma^N times the last-step Q estimate.
    The bootstrap is dropped for candidates whose termination triggers anywhere
    in the horizon.
    """
    q_hat = np.asarray(q_hat)
    horizon = q_hat.shape[-1]
    rewards = objective_rew(r_hat, d_hat, gamma, threshold, include_trigger)
    alive = first_trigger(d_hat, threshold) >= horizon
    bootstrap = np.where(alive, q_hat[..., -1], np.zeros((), dtype=q_hat.dtype))
    return rewards + (float(gamma) ** horizon) * bootstrap


def score_candidates(objective: Objective, q_hat: np.ndarray, d_hat: np.ndarray,
                     r_hat: Optional[np.ndarray], gamma: float, threshold: float,
                     include_trigger: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (masked_q, score) for the configured objective."""
    masked_q = apply_termination_mask(q_hat, d_hat, threshold, include_trigger)
    if objective is Objective.JAVG:
        return masked_q, objective_javg(masked_q)
    if r_hat is None:
        raise ShapeError(f"objective '{objective.value}' needs predicted rewards")
    if objective is Objective.REW:
        return masked_q, objective_rew(r_hat, d_hat, gamma, threshold, include_trigger)
    return masked_q, objective_td(r_hat, q_hat, d_hat, gamma, threshold, include_trigger)

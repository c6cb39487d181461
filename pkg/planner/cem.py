"""
Cross-entropy method over action sequences.
"""

import logging
from typing import Callable, Optional

import numpy as np

from models import PlanConfig, PlanResult, ACTION_DIM
from utils.error_handler import NumericalError

logger = logging.getLogger(__name__)

ScoreFn = Callable[[np.ndarray], np.ndarray]


def shift_plan(previous: np.ndarray, horizon: int) -> np.ndarray:
    """Drop the executed first action and repeat the last one to refill the horizon."""
    previous = np.asarray(previous, dtype=np.float64)
    if previous.ndim != 2 or len(previous) == 0:
        raise ValueError(f"warm start must be a non-empty (N, act_dim) array, got shape {previous.shape}")
    shifted = np.concatenate([previous[1:], previous[-1:]], axis=0)
    if len(shifted) < horizon:
        shifted = np.concatenate([shifted, np.repeat(shifted[-1:], horizon - len(shifted), axis=0)])
    return shifted[:horizon]


def cem_optimize(score_fn: ScoreFn, config: PlanConfig,
                 warm_start: Optional[np.ndarray] = None,
                 rng: Optional[np.random.Generator] = None,
                 action_dim: int = ACTION_DIM) -> PlanResult:
    """
    Refit a diagonal Gaussian over (N, action_dim) sequences to the top
    `config.elites` scores, `config.cem_iterations` times.

    Elites of the previous iteration stay in the selection pool with their
    cached scores, so the elite-mean score never decreases. If every pooled
    score is equal there is nothing to rank and the current mean is returned.
    """
    rng = rng or np.random.default_rng(config.seed)
    horizon, m = config.horizon, config.num_candidates
    mean = np.zeros((horizon, action_dim)) if warm_start is None else shift_plan(warm_start, horizon)
    std = np.full((horizon, action_dim), float(config.init_std))

    pool_actions = np.zeros((0, horizon, action_dim))
    pool_scores = np.zeros(0)
    best_sequence, best_score = mean.copy(), -np.inf
    trace = []

    for iteration in range(config.cem_iterations):
        samples = np.clip(mean + std * rng.standard_normal((m, horizon, action_dim)), -1.0, 1.0)
        scores = np.asarray(score_fn(samples), dtype=np.float64)
        if scores.shape != (m,):
            raise ValueError(f"score_fn returned shape {scores.shape}, expected ({m},)")
        if not np.all(np.isfinite(scores)):
            raise NumericalError(f"non-finite candidate scores at CEM iteration {iteration}")

        candidates = np.concatenate([pool_actions, samples])
        candidate_scores = np.concatenate([pool_scores, scores])
        if np.all(candidate_scores == candidate_scores[0]):
            logger.debug("CEM iteration %d: all %d scores equal, keeping the current mean", iteration, len(scores))
            trace.append(float(candidate_scores[0]))
            return PlanResult(action=mean[0], sequence=mean.copy(), score=float(candidate_scores[0]),
                              mean=mean, std=std, elite_trace=trace)

        order = np.argsort(-candidate_scores, kind="stable")[:config.elites]
        elites, elite_scores = candidates[order], candidate_scores[order]
        trace.append(float(elite_scores.mean()))
        if elite_scores[0] > best_score:
            best_score, best_sequence = float(elite_scores[0]), elites[0].copy()

        mean = elites.mean(axis=0)
        std = np.maximum(elites.std(axis=0), config.min_std)
        pool_actions, pool_scores = elites, elite_scores

    return PlanResult(action=best_sequence[0], sequence=best_sequence, score=best_score,
                      mean=mean, std=std, elite_trace=trace)

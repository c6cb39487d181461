"""
Batched imagination of candidate action sequences.

Step 0 starts from the filtered latent (h_t, z_t); every later step draws
z from the prior. Prior noise for (candidate c, horizon step k) comes from a
counter-based stream keyed by (seed, plan step, CEM iteration), so any
split of the candidates into chunks, evaluated in any order on any number
of threads, sees the same numbers.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from diffcore import no_grad
from models import LatentState, NoiseMode, PlanConfig
from utils.error_handler import ShapeError
from utils.rng import indexed_normal, stream_key
from worldmodel import WorldModel

logger = logging.getLogger(__name__)


@dataclass
class RolloutOutputs:
    q_hat: np.ndarray
    d_hat: np.ndarray
    r_hat: Optional[np.ndarray] = None


def rollout_noise_key(seed: int, plan_step: int, iteration: int = 0) -> int:
    return stream_key(seed, plan_step, iteration)


def _rollout_chunk(model: WorldModel, params: Mapping[str, np.ndarray], start: LatentState,
                   actions: np.ndarray, candidate_ids: np.ndarray, noise_key: Optional[int],
                   with_reward: bool) -> RolloutOutputs:
    m, horizon, _ = actions.shape
    c = model.config
    dtype = actions.dtype
    h = np.broadcast_to(start.h.astype(dtype), (m, c.h_dim))
    z = np.broadcast_to(start.z.astype(dtype), (m, c.z_dim))
    q_hat = np.zeros((m, horizon), dtype=dtype)
    d_hat = np.zeros((m, horizon), dtype=dtype)
    r_hat = np.zeros((m, horizon), dtype=dtype) if with_reward else None
    # step k of candidate i uses column k of row i; column 0 is unused (posterior start)
    steps_noise = None
    if noise_key is not None:
        steps_noise = indexed_normal(noise_key, candidate_ids, (horizon, c.z_dim)).astype(dtype)
    with no_grad():
        for k in range(horizon):
            if k > 0:
                h = model.recurrence(params, h, z, actions[:, k - 1]).data
                noise = None if steps_noise is None else steps_noise[:, k]
                z = model.prior(params, h, noise)[1].data
            q_hat[:, k] = model.predict_q(params, h, z, actions[:, k]).data
            d_hat[:, k] = model.predict_termination(params, h, z).data
            if with_reward:
                r_hat[:, k] = model.predict_reward(params, h, z, actions[:, k]).data
    return RolloutOutputs(q_hat, d_hat, r_hat)


def rollout_candidates(model: WorldModel, params: Mapping[str, np.ndarray], start: LatentState,
                       actions: np.ndarray, config: PlanConfig, plan_step: int = 0, iteration: int = 0,
                       candidate_ids: Optional[np.ndarray] = None, with_reward: bool = False,
                       executor: Optional[ThreadPoolExecutor] = None) -> RolloutOutputs:
    """
    Imagine every candidate for N steps and record Q^ and d^ (and r^) per step.

    Args:
        actions: (M, N, act_dim) candidate sequences
        candidate_ids: noise index of each row (defaults to 0..M-1)
        executor: optional thread pool; chunks of `config.chunk_size` rows are
            evaluated independently, so the result does not depend on it
    """
    c = model.config
    actions = np.asarray(actions, dtype=config.dtype)
    if actions.ndim != 3 or actions.shape[2] != c.act_dim:
        raise ShapeError(f"candidate actions must be (M, N, {c.act_dim}), got {actions.shape}")
    if start.h.shape[-1] != c.h_dim or start.z.shape[-1] != c.z_dim:
        raise ShapeError(f"start latent ({start.h.shape}, {start.z.shape}) does not match the model")
    m = actions.shape[0]
    ids = np.arange(m) if candidate_ids is None else np.asarray(candidate_ids)
    key = rollout_noise_key(config.seed, plan_step, iteration) if config.noise_mode is NoiseMode.SAMPLED else None

    bounds = [(lo, min(lo + config.chunk_size, m)) for lo in range(0, m, max(1, config.chunk_size))]
    jobs = [(actions[lo:hi], ids[lo:hi]) for lo, hi in bounds]
    run = lambda job: _rollout_chunk(model, params, start, job[0], job[1], key, with_reward)
    parts = list(executor.map(run, jobs)) if executor is not None and len(jobs) > 1 else [run(j) for j in jobs]

    return RolloutOutputs(
        q_hat=np.concatenate([p.q_hat for p in parts]),
        d_hat=np.concatenate([p.d_hat for p in parts]),
        r_hat=np.concatenate([p.r_hat for p in parts]) if with_reward else None,
    )

"""
Filtering over real observations and open-loop imagination under the prior.
"""

from dataclasses import dataclass
from typing import List, Mapping, Optional

import numpy as np

from diffcore import Value, no_grad
from models import LatentState
from utils.error_handler import ShapeError
from .network import WorldModel


def _as_array(value) -> np.ndarray:
    return value.data if isinstance(value, Value) else np.asarray(value)


def filter_step(model: WorldModel, params: Mapping[str, np.ndarray],
                previous: Optional[LatentState], previous_action, observation,
                noise: Optional[np.ndarray] = None) -> LatentState:
    """
    Fold one new observation into the latent state.

    previous=None starts from h = 0. noise=None uses the posterior mean.
    """
    c = model.config
    dtype = np.asarray(params[next(iter(params))]).dtype
    observation = np.asarray(observation, dtype=dtype)
    if observation.shape[-1] != c.obs_dim:
        raise ShapeError(f"observation dim {observation.shape[-1]} != model obs_dim {c.obs_dim}")
    with no_grad():
        if previous is None:
            h = np.zeros(observation.shape[:-1] + (c.h_dim,), dtype=dtype)
        else:
            action = np.asarray(previous_action, dtype=dtype)
            h = _as_array(model.recurrence(params, previous.h.astype(dtype), previous.z.astype(dtype), action))
        _, z = model.posterior(params, h, observation, noise)
    return LatentState(h=np.array(h), z=np.array(_as_array(z)))


def filter_sequence(model: WorldModel, params: Mapping[str, np.ndarray],
                    observations: np.ndarray, actions: np.ndarray,
                    noise: Optional[np.ndarray] = None) -> List[LatentState]:
    """
    Posterior latents for every step of a real (T, obs) stream; step t folds
    in o_t after applying a_{t-1}. noise=None gives the deterministic filter.
    """
    observations = np.asarray(observations)
    actions = np.asarray(actions)
    if len(actions) < len(observations) - 1:
        raise ShapeError(f"{len(observations)} observations need at least {len(observations) - 1} actions")
    states: List[LatentState] = []
    previous = None
    for t in range(len(observations)):
        state = filter_step(model, params, previous, actions[t - 1] if t else None, observations[t],
                            None if noise is None else noise[t])
        states.append(state)
        previous = state
    return states


@dataclass
class RolloutResult:
    """Decoded observation means (K+1, obs) and the latents that produced them."""
    predictions: np.ndarray
    latents: List[LatentState]

    @property
    def horizon(self) -> int:
        return len(self.latents) - 1


def open_loop_rollout(model: WorldModel, params: Mapping[str, np.ndarray],
                      observation, actions,
                      start_h: Optional[np.ndarray] = None,
                      noise: Optional[np.ndarray] = None) -> RolloutResult:
    """
    Reconstruct o_0 from the posterior, then imagine K = len(actions) steps
    with prior latents, decoding each one.

    start_h: recurrent state at the first observation (zeros when None).
    noise: (K, z_dim) prior noise; None uses prior means.
    """
    c = model.config
    dtype = np.asarray(params[next(iter(params))]).dtype
    actions = np.asarray(actions, dtype=dtype).reshape(-1, c.act_dim)
    if noise is not None and np.shape(noise) != (len(actions), c.z_dim):
        raise ShapeError(f"noise has shape {np.shape(noise)}, expected {(len(actions), c.z_dim)}")
    h = np.zeros(c.h_dim, dtype=dtype) if start_h is None else np.asarray(start_h, dtype=dtype)

    with no_grad():
        _, z = model.posterior(params, h, np.asarray(observation, dtype=dtype))
        latents = [LatentState(h=np.array(h), z=np.array(z.data))]
        predictions = [model.decode(params, h, z).mean.data]
        for k, action in enumerate(actions):
            h = model.recurrence(params, h, z, action).data
            _, z = model.prior(params, h, None if noise is None else noise[k])
            latents.append(LatentState(h=np.array(h), z=np.array(z.data)))
            predictions.append(model.decode(params, h, z).mean.data)
    return RolloutResult(predictions=np.stack(predictions), latents=latents)

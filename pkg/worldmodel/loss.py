"""
Sequence loss: reconstruction + joint-embedding (two KL terms) + surrogate Q.

Per step t of a filtered sub-sequence (h_0 = 0, posterior sample each step):

    rec_obs  = -log N(o_t | decoder(h_t, z_t), 1)
    rec_term = bce(termination(h_t, z_t), d_t)
    jep      = KL(sg(q_t) || p~_t) + KL(q_t || sg(p_t))
    q        = (Q(h_t, z_t, a_t) - G_t)^2
    reward   = (r(h_t, z_t, a_t) - r_t)^2              only with a reward head

p~_t is the prior on a second state unroll fed sg(z); its values equal p_t
but no gradient reaches the encoder or posterior through it at any t.

Every term is averaged over the valid (sequence, step) entries, where a step
is valid iff no done flag is set strictly before it.
"""

from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from diffcore import gaussian_kl, gaussian_nll, bce
from diffcore.tensor import Value, ArrayLike, add, mul, sub, square, vsum, div, stop_gradient
from models import LossBreakdown, valid_mask
from utils.error_handler import ShapeError
from .network import WorldModel


@dataclass
class SequenceBatch:
    """B sub-sequences of length L in [Batch, Time, Data] layout."""
    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    mc_returns: np.ndarray

    @property
    def batch_size(self) -> int:
        return int(self.observations.shape[0])

    @property
    def length(self) -> int:
        return int(self.observations.shape[1])

    @property
    def mask(self) -> np.ndarray:
        return valid_mask(self.dones)

    def check(self, model: WorldModel) -> None:
        b, l = self.rewards.shape
        c = model.config
        expected = {
            'observations': (b, l, c.obs_dim),
            'actions': (b, l, c.act_dim),
            'dones': (b, l),
            'mc_returns': (b, l),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"SequenceBatch.{name} has shape {getattr(self, name).shape}, expected {shape}")

    @classmethod
    def from_dataset(cls, dataset, rows, starts, length: int) -> "SequenceBatch":
        """Gather windows dataset[rows[i], starts[i]:starts[i] + length]."""
        rows = np.asarray(rows, dtype=np.int64)
        steps = np.asarray(starts, dtype=np.int64)[:, None] + np.arange(length)[None, :]
        return cls(
            observations=dataset.observations[rows[:, None], steps].astype(np.float64),
            actions=dataset.actions[rows[:, None], steps].astype(np.float64),
            rewards=dataset.rewards[rows[:, None], steps].astype(np.float64),
            dones=dataset.dones[rows[:, None], steps].astype(np.float64),
            mc_returns=dataset.mc_returns[rows[:, None], steps].astype(np.float64),
        )


def jep_terms(q_stats, p_stats) -> Tuple[Value, Value]:
    """
    The two KL terms of the joint-embedding loss.

    The first trains only the prior (posterior stats are detached); the
    second trains only the posterior (prior stats are detached).
    """
    return gaussian_kl(q_stats.detached(), p_stats), gaussian_kl(q_stats, p_stats.detached())


def loss_terms(model: WorldModel, params: Mapping[str, ArrayLike], batch: SequenceBatch,
               noise: Optional[np.ndarray] = None) -> Dict[str, Value]:
    """
    Unroll the filter over the batch and return each averaged loss term as a
    tape Value (keys: rec_obs, rec_term, jep, jep_prior, jep_posterior, q and
    reward when the model has a reward head).

    `noise` has shape (B, L, z_dim); None uses posterior means.
    """
    batch.check(model)
    c = model.config
    b, length = batch.batch_size, batch.length
    if noise is not None and noise.shape != (b, length, c.z_dim):
        raise ShapeError(f"noise has shape {noise.shape}, expected {(b, length, c.z_dim)}")
    mask = batch.mask
    count = float(max(mask.sum(), 1.0))

    sums: Dict[str, list] = {k: [] for k in ("rec_obs", "rec_term", "jep_prior", "jep_posterior", "q", "reward")}
    h = np.zeros((b, c.h_dim))
    # same values as h, built from sg(z): the prior-training KL stays off the posterior path
    h_prior = h
    z = None
    for t in range(length):
        if t > 0:
            h = model.recurrence(params, h, z, batch.actions[:, t - 1])
            h_prior = model.recurrence(params, h_prior, stop_gradient(z), batch.actions[:, t - 1])
        q_stats, z = model.posterior(params, h, batch.observations[:, t], None if noise is None else noise[:, t])
        p_stats, _ = model.prior(params, h)
        p_stats_prior, _ = model.prior(params, h_prior)
        m = mask[:, t]

        sums["rec_obs"].append(vsum(mul(gaussian_nll(batch.observations[:, t], model.decode(params, h, z)), m)))
        sums["rec_term"].append(vsum(mul(bce(model.termination_logit(params, h, z), batch.dones[:, t]), m)))
        kl_prior, _ = jep_terms(q_stats, p_stats_prior)
        _, kl_posterior = jep_terms(q_stats, p_stats)
        sums["jep_prior"].append(vsum(mul(kl_prior, m)))
        sums["jep_posterior"].append(vsum(mul(kl_posterior, m)))
        q_err = sub(model.predict_q(params, h, z, batch.actions[:, t]), batch.mc_returns[:, t])
        sums["q"].append(vsum(mul(square(q_err), m)))
        if model.has_reward_head:
            r_err = sub(model.predict_reward(params, h, z, batch.actions[:, t]), batch.rewards[:, t])
            sums["reward"].append(vsum(mul(square(r_err), m)))

    terms = {}
    for name, parts in sums.items():
        if not parts:
            continue
        total = parts[0]
        for part in parts[1:]:
            total = add(total, part)
        terms[name] = div(total, count)
    terms["jep"] = add(terms["jep_prior"], terms["jep_posterior"])
    return terms


def total_loss(terms: Mapping[str, Value]) -> Value:
    total = add(add(add(terms["rec_obs"], terms["rec_term"]), terms["jep"]), terms["q"])
    if "reward" in terms:
        total = add(total, terms["reward"])
    return total


def loss_sequence(model: WorldModel, params: Mapping[str, ArrayLike], batch: SequenceBatch,
                  noise: Optional[np.ndarray] = None) -> Tuple[Value, LossBreakdown]:
    """Scalar training loss plus its per-term breakdown."""
    terms = loss_terms(model, params, batch, noise)
    total = total_loss(terms)
    breakdown = LossBreakdown(
        total=total.item(),
        rec_obs=terms["rec_obs"].item(),
        rec_term=terms["rec_term"].item(),
        jep=terms["jep"].item(),
        q=terms["q"].item(),
        reward=terms["reward"].item() if "reward" in terms else None,
    )
    return total, breakdown

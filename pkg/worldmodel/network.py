"""
Recurrent latent world model.

    h_t   = gru(h_{t-1}, mlp([z_{t-1}; a_{t-1}]))      recurrence
    z_t   ~ q(z | h_t, o_t)                            posterior
    z^_t  ~ p(z | h_t)                                 prior
    o^_t  ~ N(decoder(h_t, z_t), 1)                    reconstruction
    d^_t  = sigmoid(termination(h_t, z_t))             termination
    Q^_t  = q_head(h_t, z_t, a_t)                      surrogate value
    r^_t  = reward_head(h_t, z_t, a_t)                 optional, baselines only

Every operation takes the parameter dict first, so the same code runs on
plain arrays (inference) and on tape Values (training). Inputs may be single
vectors or (batch, dim) matrices.
"""

import logging
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from diffcore import GaussianStats, MLPSpec, GRUSpec, reparam_sample
from diffcore.tensor import Value, ArrayLike, concat, getitem, sigmoid
from utils.error_handler import ShapeError, IncompatibleModelError
from .config import ModelConfig

logger = logging.getLogger(__name__)

Params = Mapping[str, ArrayLike]


class WorldModel:
    """Parameter layout and forward operations for one ModelConfig."""

    def __init__(self, config: ModelConfig):
        self.config = config
        c = config
        self.encoder = MLPSpec("encoder", (c.obs_dim,) + c.encoder_widths, output_activation="elu")
        self.posterior_net = MLPSpec("posterior", (c.h_dim + c.encoding_dim, c.posterior_width, 2 * c.z_dim))
        self.prior_net = MLPSpec("prior", (c.h_dim, c.posterior_width, 2 * c.z_dim))
        self.recurrent_input = MLPSpec("rec_in", (c.z_dim + c.act_dim, c.h_dim), output_activation="elu")
        self.gru = GRUSpec("gru", c.h_dim, c.h_dim)
        self.decoder = MLPSpec("decoder", (c.h_dim + c.z_dim,) + c.decoder_widths + (c.obs_dim,))
        self.termination_head = MLPSpec("termination", (c.h_dim + c.z_dim,) + c.head_widths + (1,))
        self.q_head = MLPSpec("q", (c.h_dim + c.z_dim + c.act_dim,) + c.head_widths + (1,))
        self.reward_head = (MLPSpec("reward", (c.h_dim + c.z_dim + c.act_dim,) + c.head_widths + (1,))
                            if c.enable_reward_head else None)

    # ── parameter layout ───────────────────────────────────
    def groups(self) -> Dict[str, list]:
        """Named parameter groups; each group lists its sub-networks."""
        groups = {
            "posterior": [self.encoder, self.posterior_net],
            "prior": [self.prior_net],
            "recurrence": [self.recurrent_input, self.gru],
            "decoder": [self.decoder],
            "termination": [self.termination_head],
            "value": [self.q_head],
        }
        if self.reward_head is not None:
            groups["reward"] = [self.reward_head]
        return groups

    def group_names(self, group: str) -> List[str]:
        """Parameter names belonging to one group."""
        names = []
        for spec in self.groups()[group]:
            names.extend(spec.param_shapes())
        return sorted(names)

    def param_shapes(self) -> Dict[str, tuple]:
        shapes = {}
        for specs in self.groups().values():
            for spec in specs:
                shapes.update(spec.param_shapes())
        return shapes

    def init_params(self, seed: Optional[int] = None) -> Dict[str, np.ndarray]:
        """Glorot weights and zero biases; sub-networks are initialized in sorted order."""
        rng = np.random.default_rng(self.config.seed if seed is None else seed)
        params = {}
        specs = [spec for group in self.groups().values() for spec in group]
        for spec in sorted(specs, key=lambda s: s.prefix):
            params.update(spec.init(rng))
        return params

    def zero_params(self) -> Dict[str, np.ndarray]:
        return {name: np.zeros(shape) for name, shape in self.param_shapes().items()}

    def check_params(self, params: Params) -> None:
        shapes = self.param_shapes()
        missing = sorted(set(shapes) - set(params))
        if missing:
            raise ShapeError(f"Missing world-model parameters: {missing[:5]}")
        for name, shape in shapes.items():
            if tuple(np.shape(params[name].data if isinstance(params[name], Value) else params[name])) != shape:
                raise ShapeError(f"Parameter '{name}' does not have shape {shape}")

    @property
    def has_reward_head(self) -> bool:
        return self.reward_head is not None

    # ── operations ─────────────────────────────────────────
    def encode(self, params: Params, o: ArrayLike) -> Value:
        return self.encoder(params, o)

    def recurrence(self, params: Params, h: ArrayLike, z: ArrayLike, a: ArrayLike) -> Value:
        """h' = gru(h, mlp([z; a]))"""
        x = self.recurrent_input(params, concat([z, a], axis=-1))
        return self.gru(params, h, x)

    def posterior(self, params: Params, h: ArrayLike, o: ArrayLike,
                  noise: Optional[np.ndarray] = None) -> Tuple[GaussianStats, Value]:
        """Stats of q(z | h, o) and a reparameterized sample; noise=None returns the mean."""
        raw = self.posterior_net(params, concat([h, self.encode(params, o)], axis=-1))
        stats = GaussianStats.from_raw(raw, self.config.z_dim)
        return stats, self._sample(stats, noise)

    def prior(self, params: Params, h: ArrayLike,
              noise: Optional[np.ndarray] = None) -> Tuple[GaussianStats, Value]:
        raw = self.prior_net(params, h)
        stats = GaussianStats.from_raw(raw, self.config.z_dim)
        return stats, self._sample(stats, noise)

    def decode(self, params: Params, h: ArrayLike, z: ArrayLike) -> GaussianStats:
        """Observation distribution with unit std."""
        mean = self.decoder(params, concat([h, z], axis=-1))
        return GaussianStats(mean=mean, std=Value(np.ones(mean.shape, dtype=mean.dtype)))

    def termination_logit(self, params: Params, h: ArrayLike, z: ArrayLike) -> Value:
        return _scalar_head(self.termination_head(params, concat([h, z], axis=-1)))

    def predict_termination(self, params: Params, h: ArrayLike, z: ArrayLike) -> Value:
        return sigmoid(self.termination_logit(params, h, z))

    def predict_q(self, params: Params, h: ArrayLike, z: ArrayLike, a: ArrayLike) -> Value:
        return _scalar_head(self.q_head(params, concat([h, z, a], axis=-1)))

    def predict_reward(self, params: Params, h: ArrayLike, z: ArrayLike, a: ArrayLike) -> Value:
        if self.reward_head is None:
            raise IncompatibleModelError(
                "This world model was trained without a reward head; retrain with --enable-reward-head")
        return _scalar_head(self.reward_head(params, concat([h, z, a], axis=-1)))

    @staticmethod
    def _sample(stats: GaussianStats, noise: Optional[np.ndarray]) -> Value:
        if noise is None:
            return stats.mean
        return reparam_sample(stats, noise)


def _scalar_head(out: Value) -> Value:
    return getitem(out, (Ellipsis, 0))


def cast_params(params: Mapping[str, np.ndarray], dtype) -> Dict[str, np.ndarray]:
    """Copy of `params` in the given float precision (float32 inference)."""
    return {name: np.asarray(value, dtype=dtype) for name, value in params.items()}

"""
Distribution math for diagonal Gaussians and Bernoulli termination flags.
"""

from dataclasses import dataclass

import numpy as np

from utils.error_handler import ShapeError
from .tensor import (
    Value, ArrayLike, as_value, stop_gradient, softplus, log, square, mul, add, sub, div, vsum,
    getitem,
)

STD_FLOOR = 1e-4
HALF_LOG_2PI = 0.5 * float(np.log(2.0 * np.pi))


@dataclass
class GaussianStats:
    """Diagonal Gaussian (mean, std); std > 0 elementwise."""
    mean: Value
    std: Value

    @property
    def dim(self) -> int:
        return self.mean.shape[-1]

    @classmethod
    def from_raw(cls, raw: Value, dim: int) -> "GaussianStats":
        """Split a head output [mean | raw_std] and map raw_std through softplus + floor."""
        if raw.shape[-1] != 2 * dim:
            raise ShapeError(f"expected last dim {2 * dim}, got {raw.shape[-1]}")
        mean = getitem(raw, (Ellipsis, slice(0, dim)))
        std = add(softplus(getitem(raw, (Ellipsis, slice(dim, 2 * dim)))), STD_FLOOR)
        return cls(mean=mean, std=std)

    def detached(self) -> "GaussianStats":
        return GaussianStats(stop_gradient(self.mean), stop_gradient(self.std))


def _check_dims(a: Value, b: Value, what: str) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise ShapeError(f"{what}: dimension mismatch {a.shape} vs {b.shape}")


def gaussian_kl(q: GaussianStats, p: GaussianStats) -> Value:
    """KL(q || p) summed over the last axis (one value per leading index)."""
    _check_dims(q.mean, p.mean, "gaussian_kl")
    log_ratio = log(div(p.std, q.std))
    spread = div(add(square(q.std), square(sub(q.mean, p.mean))), mul(2.0, square(p.std)))
    return vsum(sub(add(log_ratio, spread), 0.5), axis=-1)


def gaussian_nll(x: ArrayLike, stats: GaussianStats) -> Value:
    """Negative log-likelihood of x under the diagonal Gaussian, summed over the last axis."""
    x = as_value(x)
    _check_dims(x, stats.mean, "gaussian_nll")
    quad = div(square(sub(x, stats.mean)), mul(2.0, square(stats.std)))
    return vsum(add(add(log(stats.std), quad), HALF_LOG_2PI), axis=-1)


def bce(logit: ArrayLike, target: ArrayLike) -> Value:
    """
    Binary cross-entropy of sigmoid(logit) against target in {0, 1}.

    Written as softplus(logit) - target * logit, which never overflows.
    """
    logit = as_value(logit)
    target = np.asarray(target.data if isinstance(target, Value) else target, dtype=logit.dtype)
    return sub(softplus(logit), mul(target, logit))


def probability_to_logit(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    return np.log(p) - np.log1p(-p)


def reparam_sample(stats: GaussianStats, noise) -> Value:
    """z = mean + std * noise; noise is caller-owned and receives no gradient."""
    noise = np.asarray(noise, dtype=stats.mean.dtype)
    if noise.shape[-1] != stats.dim:
        raise ShapeError(f"reparam_sample: noise dim {noise.shape[-1]} != {stats.dim}")
    return add(stats.mean, mul(stats.std, noise))

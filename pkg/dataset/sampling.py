"""
Random bounded-delta actions: a_t = clip(a_{t-1} + eta * delta, -1, 1), delta ~ U(-1, 1)^3.
"""

import numpy as np

DEFAULT_ETA = 0.32


def apply_action_delta(prev, delta, eta: float = DEFAULT_ETA) -> np.ndarray:
    return np.clip(np.asarray(prev, dtype=np.float64) + eta * np.asarray(delta, dtype=np.float64), -1.0, 1.0)


def sample_action_delta(prev, rng: np.random.Generator, eta: float = DEFAULT_ETA) -> np.ndarray:
    prev = np.asarray(prev, dtype=np.float64)
    return apply_action_delta(prev, rng.uniform(-1.0, 1.0, size=prev.shape), eta)


def quantize_action(action, prev, eta: float = DEFAULT_ETA) -> np.ndarray:
    """
    Round to float32 (the stored precision) while keeping every component
    within eta of `prev` and inside [-1, 1]. Rounding may overshoot by one
    ulp; such components are stepped back toward `prev`.
    """
    q = np.asarray(action, dtype=np.float64).astype(np.float32)
    p = np.asarray(prev, dtype=np.float32)
    over = np.abs(q.astype(np.float64) - p.astype(np.float64)) > eta
    if np.any(over):
        q = np.where(over, np.nextafter(q, p), q)
    return np.clip(q, np.float32(-1.0), np.float32(1.0))

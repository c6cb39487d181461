"""
Reverse-mode autodiff, distribution math, layers and optimizer for the world model
"""

from .tensor import Value, as_value, no_grad, is_grad_enabled, stop_gradient
from .functional import (
    GaussianStats,
    STD_FLOOR,
    gaussian_kl,
    gaussian_nll,
    bce,
    probability_to_logit,
    reparam_sample,
)
from .layers import mlp_forward, gru_cell, MLPSpec, GRUSpec
from .optim import AdamState, adam_step, clip_by_global_norm
from .gradcheck import check_gradients, GradCheckReport

__all__ = [
    'Value', 'as_value', 'no_grad', 'is_grad_enabled', 'stop_gradient',
    'GaussianStats', 'STD_FLOOR', 'gaussian_kl', 'gaussian_nll', 'bce',
    'probability_to_logit', 'reparam_sample',
    'mlp_forward', 'gru_cell', 'MLPSpec', 'GRUSpec',
    'AdamState', 'adam_step', 'clip_by_global_norm',
    'check_gradients', 'GradCheckReport',
]

"""
Offline random-delta data collection, MC returns and LCD1 storage
"""

from .sampling import sample_action_delta, apply_action_delta, quantize_action, DEFAULT_ETA
from .collection import (
    collect, collect_episode, compute_mc_returns, truncation_bias_bound, episode_seed, returns_match,
)
from .storage import save, load

__all__ = [
    'sample_action_delta', 'apply_action_delta', 'quantize_action', 'DEFAULT_ETA',
    'collect', 'collect_episode', 'compute_mc_returns', 'truncation_bias_bound', 'episode_seed',
    'returns_match', 'save', 'load',
]

"""
Variance checks for the averaged value estimate and interpretability exports
"""

from .variance import (
    v_upper, v_lower, analytic_variance, step_variances, empirical_variance, containment_grid,
)
from .exports import (
    QValueMap, qvalue_map, filtered_latent_at, dump_rollout, RolloutAccuracy, rollout_mse,
    open_loop_rollout_batch, dump_latents, latent_columns, latent_centroids,
)
from .pgm import write_pgm, read_pgm, to_gray

__all__ = [
    'v_upper', 'v_lower', 'analytic_variance', 'step_variances', 'empirical_variance', 'containment_grid',
    'QValueMap', 'qvalue_map', 'filtered_latent_at', 'dump_rollout', 'RolloutAccuracy',
    'rollout_mse', 'open_loop_rollout_batch', 'dump_latents', 'latent_columns', 'latent_centroids',
    'write_pgm', 'read_pgm', 'to_gray',
]

"""
Value-guided sampling MPC: imagined rollouts, termination masking, CEM, control loop
"""

from .objectives import (
    first_trigger, apply_termination_mask, objective_javg, objective_rew, objective_td, score_candidates,
)
from .rollout import rollout_candidates, rollout_noise_key, RolloutOutputs
from .cem import cem_optimize, shift_plan
from .mpc import ValueGuidedPlanner, CandidateScorer, plan_step
from .control_loop import (
    EpisodeMetrics, LoopSummary, run_episode, control_loop, evaluation_seed, write_episode_csv,
    EPISODE_COLUMNS, SUMMARY_COLUMNS,
)

__all__ = [
    'first_trigger', 'apply_termination_mask', 'objective_javg', 'objective_rew', 'objective_td',
    'score_candidates',
    'rollout_candidates', 'rollout_noise_key', 'RolloutOutputs',
    'cem_optimize', 'shift_plan',
    'ValueGuidedPlanner', 'CandidateScorer', 'plan_step',
    'EpisodeMetrics', 'LoopSummary', 'run_episode', 'control_loop', 'evaluation_seed',
    'write_episode_csv', 'EPISODE_COLUMNS', 'SUMMARY_COLUMNS',
]

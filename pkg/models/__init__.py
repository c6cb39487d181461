"""
Data models for the contact world-model pipeline.
"""

from .env_types import (
    TaskKind, Action, EnvState, Observation, StepResult,
    ACTION_DIM, NUM_RAYS, PROPRIO_DIM, OBS_DIM,
)
from .trajectory import Transition, Trajectory, DatasetHeader, Dataset, valid_mask, DATASET_VERSION
from .world_state import LatentState, LossBreakdown, LOSS_COLUMNS
from .plan_types import Objective, NoiseMode, PlanConfig, CandidateBatch, PlanResult
from .analysis_types import NoiseModel, BoundReport, BOUND_REPORT_COLUMNS
from .validation import (
    ValidationError,
    ValidationResult,
    validate_action_array,
    validate_plan_config,
    validate_noise_model,
    validate_dataset_header,
    validate_trajectory,
)

__all__ = [
    # Environment
    'TaskKind', 'Action', 'EnvState', 'Observation', 'StepResult',
    'ACTION_DIM', 'NUM_RAYS', 'PROPRIO_DIM', 'OBS_DIM',
    # Data
    'Transition', 'Trajectory', 'DatasetHeader', 'Dataset', 'valid_mask', 'DATASET_VERSION',
    # World model
    'LatentState', 'LossBreakdown', 'LOSS_COLUMNS',
    # Planner
    'Objective', 'NoiseMode', 'PlanConfig', 'CandidateBatch', 'PlanResult',
    # Analysis
    'NoiseModel', 'BoundReport', 'BOUND_REPORT_COLUMNS',
    # Validation
    'ValidationError', 'ValidationResult', 'validate_action_array', 'validate_plan_config',
    'validate_noise_model', 'validate_dataset_header', 'validate_trajectory',
]

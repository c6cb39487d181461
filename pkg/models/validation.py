"""
Validation functions for data models.
"""

from typing import List, Dict, Any, Optional

import numpy as np

from utils.error_handler import UsageError
from .env_types import OBS_DIM, ACTION_DIM
from .trajectory import Trajectory, DatasetHeader
from .plan_types import PlanConfig
from .analysis_types import NoiseModel


class ValidationError(UsageError):
    """Custom exception for validation errors."""
    def __init__(self, message: str, field: Optional[str] = None):
        self.message = message
        self.field = field
        super().__init__(message)


class ValidationResult:
    """Result of validation with errors and warnings."""
    def __init__(self):
        self.errors: List[str] = []
        self.warnings: List[str] = []
        self.is_valid: bool = True

    def add_error(self, message: str):
        """Add validation error."""
        self.errors.append(message)
        self.is_valid = False

    def add_warning(self, message: str):
        """Add validation warning."""
        self.warnings.append(message)

    def has_errors(self) -> bool:
        return len(self.errors) > 0

    def has_warnings(self) -> bool:
        return len(self.warnings) > 0

    def raise_if_invalid(self, what: str):
        if not self.is_valid:
            raise ValidationError(f"Invalid {what}: {'; '.join(self.errors)}")


def validate_action_array(actions) -> bool:
    """True when the last axis has 3 components, all finite and inside [-1, 1]."""
    actions = np.asarray(actions)
    if actions.shape[-1:] != (ACTION_DIM,):
        return False
    return bool(np.all(np.isfinite(actions)) and np.all(np.abs(actions) <= 1.0))


def validate_plan_config(config: PlanConfig) -> ValidationResult:
    """
    Check planner hyperparameters.

    Args:
        config: PlanConfig to validate

    Returns:
        ValidationResult with errors for every violated constraint
    """
    result = ValidationResult()
    if config.num_candidates < 1:
        result.add_error("num_candidates must be at least 1")
    if config.horizon < 1:
        result.add_error("horizon must be at least 1")
    if config.cem_iterations < 1:
        result.add_error("cem_iterations must be at least 1")
    if not 1 <= config.elites <= config.num_candidates:
        result.add_error(f"elites must be in [1, num_candidates={config.num_candidates}]")
    if not 0.0 < config.termination_threshold < 1.0:
        result.add_error("termination_threshold must be in (0, 1)")
    if not 0.0 <= config.gamma <= 1.0:
        result.add_error("gamma must be in [0, 1]")
    if config.init_std <= 0 or config.min_std <= 0:
        result.add_error("init_std and min_std must be positive")
    elif config.min_std > config.init_std:
        result.add_warning("min_std exceeds init_std; sampling never narrows")
    if config.precision not in ("float32", "float64"):
        result.add_error("precision must be float32 or float64")
    if config.chunk_size < 1 or config.workers < 1:
        result.add_error("chunk_size and workers must be at least 1")
    return result


def validate_noise_model(noise: NoiseModel) -> ValidationResult:
    result = ValidationResult()
    if noise.horizon < 1:
        result.add_error("horizon must be at least 1")
    if not 0.0 <= noise.rho < 1.0:
        result.add_error("rho must be in [0, 1)")
    if noise.v_min < 0 or noise.v_min > noise.v_max:
        result.add_error("variances must satisfy 0 <= v_min <= v_max")
    if noise.trials < 10:
        result.add_error("trials must be at least 10")
    elif noise.trials < 10_000:
        result.add_warning("fewer than 10^4 trials; standard errors will be wide")
    return result


def validate_dataset_header(header: DatasetHeader,
                            obs_dim: int = OBS_DIM,
                            act_dim: int = ACTION_DIM) -> ValidationResult:
    result = ValidationResult()
    if header.obs_dim != obs_dim:
        result.add_error(f"obs_dim {header.obs_dim} != {obs_dim}")
    if header.act_dim != act_dim:
        result.add_error(f"act_dim {header.act_dim} != {act_dim}")
    if header.horizon < 1:
        result.add_error("horizon must be at least 1")
    if not 0.0 <= header.gamma < 1.0:
        result.add_error("gamma must be in [0, 1)")
    if len(header.env_hash) != 8:
        result.add_error("env_hash must be 8 bytes")
    return result


def validate_trajectory(trajectory: Trajectory) -> Dict[str, Any]:
    """
    Validate one stored trajectory.

    Returns:
        Dictionary with validation result
    """
    if trajectory.observations.shape != (trajectory.horizon, OBS_DIM):
        return {'is_valid': False, 'message': f'Observation block has shape {trajectory.observations.shape}'}
    if not validate_action_array(trajectory.actions):
        return {'is_valid': False, 'message': 'Actions must be finite and inside [-1, 1]'}
    if not np.all(np.isfinite(trajectory.rewards)):
        return {'is_valid': False, 'message': 'Rewards must be finite'}
    if not set(np.unique(trajectory.dones).tolist()) <= {0.0, 1.0}:
        return {'is_valid': False, 'message': 'Done flags must be 0 or 1'}
    if not 1 <= trajectory.length <= trajectory.horizon:
        return {'is_valid': False, 'message': f'Length {trajectory.length} outside [1, {trajectory.horizon}]'}
    return {'is_valid': True, 'message': 'Valid trajectory'}

"""
Receding-horizon controller: filter each real observation into (h, z),
plan with CEM over imagined rollouts, execute only the first action.
"""

from typing import Optional, Union

import numpy as np

from models import Action, LatentState, Observation, PlanConfig, PlanResult
from planner.mpc import ValueGuidedPlanner
from utils.error_handler import ShapeError, UsageError
from utils.rng import stream_key
from worldmodel import ModelSnapshot, filter_step
from .base_agent import BaseAgent

_FILTER_STREAM = 13
_FILTER_MODES = ("mean", "sampled")


class ValueGuidedMPCAgent(BaseAgent):

    def __init__(self, snapshot: ModelSnapshot, plan_config: Optional[PlanConfig] = None,
                 filter_mode: Optional[str] = None, warm_start: Optional[bool] = None):
        super().__init__("value_mpc")
        self.snapshot = snapshot
        self.plan_config = plan_config or PlanConfig()
        self.filter_mode = filter_mode or self.config.get("filter_mode", "mean")
        if self.filter_mode not in _FILTER_MODES:
            raise UsageError(f"filter_mode must be one of {_FILTER_MODES}, got '{self.filter_mode}'")
        self.use_warm_start = self.config.get("warm_start", True) if warm_start is None else bool(warm_start)

        self.planner = ValueGuidedPlanner(snapshot, self.plan_config)
        self.model = self.planner.model
        self.params = self.planner.params

        self.latent: Optional[LatentState] = None
        self.previous_action: Optional[np.ndarray] = None
        self.previous_plan: Optional[np.ndarray] = None
        self.last_result: Optional[PlanResult] = None
        self.rng = np.random.default_rng([0, _FILTER_STREAM])

    def reset(self, observation: Observation, episode_seed: int = 0) -> None:
        super().reset(observation, episode_seed)
        self.latent = None
        self.previous_action = None
        self.previous_plan = None
        self.last_result = None
        self.rng = np.random.default_rng([self.episode_seed, _FILTER_STREAM])

    def observe(self, observation: Union[Observation, np.ndarray]) -> LatentState:
        """Fold the newest observation (and the action that led to it) into the latent state."""
        vector = observation.to_vector() if isinstance(observation, Observation) else np.asarray(observation)
        if vector.shape[-1] != self.model.config.obs_dim:
            raise ShapeError(f"environment observation dim {vector.shape[-1]} != "
                             f"model obs_dim {self.model.config.obs_dim}")
        noise = None
        if self.filter_mode == "sampled":
            noise = self.rng.standard_normal(self.model.config.z_dim)
        self.latent = filter_step(self.model, self.params, self.latent, self.previous_action, vector, noise)
        return self.latent

    def act(self, observation: Observation) -> Action:
        latent = self.observe(observation)
        step_key = stream_key(self.episode_seed, self.step_count)
        warm = self.previous_plan if self.use_warm_start else None
        result = self.planner.plan(latent, warm_start=warm, plan_step=step_key)

        self.last_result = result
        self.previous_plan = result.sequence
        action = np.clip(np.asarray(result.action, dtype=np.float64), -1.0, 1.0)
        self.log_message(f"step {self.step_count}: score {result.score:.4f} action {np.round(action, 3).tolist()}",
                         "DEBUG")
        self.previous_action = action
        self.step_count += 1
        return Action.from_array(action)

    def close(self) -> None:
        self.planner.close()

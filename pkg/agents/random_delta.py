"""
Random bounded-delta baseline: the same action process used for data collection.
"""

from typing import Optional

import numpy as np

from dataset.sampling import sample_action_delta, quantize_action
from models import Action, Observation
from .base_agent import BaseAgent

_ACTION_STREAM = 7


class RandomDeltaAgent(BaseAgent):

    def __init__(self, eta: Optional[float] = None):
        super().__init__("random_delta")
        self.eta = float(self.config.get("eta", 0.32) if eta is None else eta)
        self.initial_action = np.asarray(self.config.get("initial_action", [0.0, 0.0, 0.0]), dtype=np.float32)
        self.rng = np.random.default_rng([0, _ACTION_STREAM])
        self.previous = self.initial_action.copy()

    def reset(self, observation: Observation, episode_seed: int = 0) -> None:
        super().reset(observation, episode_seed)
        self.rng = np.random.default_rng([self.episode_seed, _ACTION_STREAM])
        self.previous = self.initial_action.copy()

    def act(self, observation: Observation) -> Action:
        action = quantize_action(sample_action_delta(self.previous, self.rng, self.eta), self.previous, self.eta)
        self.previous = action
        self.step_count += 1
        return Action.from_array(action)

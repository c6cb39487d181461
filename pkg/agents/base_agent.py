# agents/base_agent.py

import logging
from abc import ABC, abstractmethod
from datetime import datetime
from pathlib import Path
from typing import Dict, Any

from config.settings import AGENT_CONFIGS, Config
from models import Action, Observation


class BaseAgent(ABC):
    """
    A controller driven by the control loop: reset() at episode start, then
    act() once per environment step.
    """

    def __init__(self, agent_type: str):
        self.agent_type = agent_type
        # Per-agent defaults (step size, filter mode, ...)
        self.config = dict(AGENT_CONFIGS.get(agent_type, {}))

        # ────────────────────────────────────────────────────
        # Logging: level from LOG_LEVEL, file under LOG_DIR
        # ────────────────────────────────────────────────────
        log_level = getattr(logging, Config.LOG_LEVEL, logging.INFO)
        self.logger = logging.getLogger(f"Agent.{agent_type}")
        self.logger.setLevel(log_level)

        # Only add handlers once
        if not self.logger.handlers:
            fmt = logging.Formatter(
                "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
            )
            log_dir = Path(Config.LOG_DIR)
            log_dir.mkdir(parents=True, exist_ok=True)
            fh = logging.FileHandler(log_dir / "agents.log")
            fh.setFormatter(fmt)
            self.logger.addHandler(fh)
            self.logger.propagate = True

        self.episode_seed = 0
        self.step_count = 0
        self.episode_count = 0

    def reset(self, observation: Observation, episode_seed: int = 0) -> None:
        """Start a new episode from its first observation."""
        self.episode_seed = int(episode_seed)
        self.step_count = 0
        self.episode_count += 1
        self.log_message(f"episode {self.episode_count} start (seed {self.episode_seed})", "DEBUG")

    @abstractmethod
    def act(self, observation: Observation) -> Action:
        """Return the action to execute for the current observation."""

    def log_message(self, msg: str, level: str = "INFO") -> None:
        """
        Helper to uniform logging across agents.
        """
        fn = getattr(self.logger, level.lower(), self.logger.info)
        fn(f"[{self.agent_type}] {msg}")

    def status(self) -> Dict[str, Any]:
        """
        Report basic readiness and progress.
        """
        return {
            "agent": self.agent_type,
            "ready": True,
            "episodes": self.episode_count,
            "steps": self.step_count,
            "timestamp": datetime.now().isoformat(),
        }

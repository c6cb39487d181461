# agents/__init__.py
"""
Controllers driven by the control loop
"""

from .base_agent import BaseAgent
from .random_delta import RandomDeltaAgent
from .value_mpc import ValueGuidedMPCAgent

__all__ = [
    'BaseAgent',
    'RandomDeltaAgent',
    'ValueGuidedMPCAgent',
]

"""
Planar contact environments with a ray-depth sensor
"""

from .config import EnvConfig
from .contact_env import ContactEnv
from .raycast import raycast_depth, ray_distance, Scene, Segment, Disc, Box

__all__ = ['EnvConfig', 'ContactEnv', 'raycast_depth', 'ray_distance', 'Scene', 'Segment', 'Disc', 'Box']

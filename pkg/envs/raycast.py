"""
1D depth sensor: a fan of rays in the sagittal (x, z) plane.

Angles are measured from the forward horizontal, positive upward. The fan
is fixed to the head, so a forward lean tilts every ray down by the lean
angle. There is no ground plane.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from models.env_types import EnvState, TaskKind
from .config import EnvConfig


@dataclass(frozen=True)
class Segment:
    """Vertical segment x = x, z in [z_min, z_max] (wall face)."""
    x: float
    z_min: float
    z_max: float


@dataclass(frozen=True)
class Disc:
    x: float
    z: float
    radius: float


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle (arch lintel)."""
    x_min: float
    x_max: float
    z_min: float
    z_max: float


@dataclass
class Scene:
    segments: List[Segment] = field(default_factory=list)
    discs: List[Disc] = field(default_factory=list)
    boxes: List[Box] = field(default_factory=list)


def ray_angles(config: EnvConfig, lean: float = 0.0) -> np.ndarray:
    half = np.deg2rad(config.ray_half_fov_deg)
    return np.linspace(-half, half, config.num_rays) - lean


def _hit_segment(ox, oz, dx, dz, seg: Segment) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (seg.x - ox) / dx
    z = oz + t * dz
    hit = (dx != 0) & (t >= 0) & (z >= seg.z_min) & (z <= seg.z_max)
    return np.where(hit, t, np.inf)


def _hit_disc(ox, oz, dx, dz, disc: Disc) -> np.ndarray:
    px, pz = ox - disc.x, oz - disc.z
    b = dx * px + dz * pz
    c = px * px + pz * pz - disc.radius ** 2
    if c <= 0:
        return np.zeros_like(dx)
    disc_term = b * b - c
    t = -b - np.sqrt(np.maximum(disc_term, 0.0))
    return np.where((disc_term >= 0) & (t >= 0), t, np.inf)


def _hit_box(ox, oz, dx, dz, box: Box) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        tx1 = (box.x_min - ox) / dx
        tx2 = (box.x_max - ox) / dx
        tz1 = (box.z_min - oz) / dz
        tz2 = (box.z_max - oz) / dz
    inside_x = (ox >= box.x_min) & (ox <= box.x_max)
    inside_z = (oz >= box.z_min) & (oz <= box.z_max)
    t_near_x = np.where(dx == 0, np.where(inside_x, -np.inf, np.inf), np.minimum(tx1, tx2))
    t_far_x = np.where(dx == 0, np.where(inside_x, np.inf, -np.inf), np.maximum(tx1, tx2))
    t_near_z = np.where(dz == 0, np.where(inside_z, -np.inf, np.inf), np.minimum(tz1, tz2))
    t_far_z = np.where(dz == 0, np.where(inside_z, np.inf, -np.inf), np.maximum(tz1, tz2))
    t_near = np.maximum(t_near_x, t_near_z)
    t_far = np.minimum(t_far_x, t_far_z)
    hit = (t_near <= t_far) & (t_far >= 0)
    return np.where(hit, np.maximum(t_near, 0.0), np.inf)


def ray_distance(origin: Tuple[float, float], angles: np.ndarray, scene: Scene, max_range: float) -> np.ndarray:
    """Exact distance along each ray to the nearest scene boundary, clipped to `max_range`."""
    angles = np.asarray(angles, dtype=np.float64)
    dx, dz = np.cos(angles), np.sin(angles)
    ox, oz = float(origin[0]), float(origin[1])
    best = np.full(angles.shape, np.inf)
    for seg in scene.segments:
        best = np.minimum(best, _hit_segment(ox, oz, dx, dz, seg))
    for disc in scene.discs:
        best = np.minimum(best, _hit_disc(ox, oz, dx, dz, disc))
    for box in scene.boxes:
        best = np.minimum(best, _hit_box(ox, oz, dx, dz, box))
    return np.minimum(best, max_range)


def head_position(state: EnvState, config: EnvConfig) -> Tuple[float, float]:
    height = state.body_height + config.head_offset
    return state.body_x + height * np.sin(state.lean), height * np.cos(state.lean)


def scene_for(state: EnvState, config: EnvConfig) -> Scene:
    scene = Scene()
    if state.task is TaskKind.WALL:
        scene.segments.append(Segment(state.body_x + state.wall_distance, 0.0, config.wall_height))
    elif state.task is TaskKind.BALL:
        scene.discs.append(Disc(state.ball_x, state.ball_z, config.ball_radius))
    elif state.task is TaskKind.ARCH:
        scene.boxes.append(Box(state.arch_x, state.arch_x + config.arch_depth,
                               state.arch_clearance, state.arch_clearance + config.arch_lintel_thickness))
    return scene


def raycast_depth(state: EnvState, config: EnvConfig, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    32 depths from the head. With `rng` given (and depth_noise > 0),
    Gaussian noise is added and the result re-clipped to [0, max_range].
    """
    depth = ray_distance(head_position(state, config), ray_angles(config, state.lean),
                         scene_for(state, config), config.max_range)
    if rng is not None and config.depth_noise > 0:
        depth = np.clip(depth + rng.normal(0.0, config.depth_noise, size=depth.shape), 0.0, config.max_range)
    return depth

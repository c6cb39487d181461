"""
Environment constants, exposed as flat `env.*` keys so they can be printed,
overridden from a config file and hashed into dataset headers.
"""

from dataclasses import dataclass, fields, replace
from typing import Dict, Any, Mapping

from config.settings import dump_kv, load_kv_file, resolve_run_config
from utils.hashing import short_hash

PREFIX = "env."


@dataclass(frozen=True)
class EnvConfig:
    dt: float = 0.04
    max_steps: int = 200

    # reach box (body frame) and body height, meters
    reach_x_min: float = 0.0
    reach_x_max: float = 0.6
    reach_z_min: float = 0.2
    reach_z_max: float = 1.2
    height_min: float = 0.4
    height_max: float = 0.8
    hand_speed: float = 1.5
    height_speed: float = 0.5
    head_offset: float = 0.35

    # lean dynamics
    gravity: float = 9.81
    lean_length: float = 0.8
    fall_angle: float = 0.5
    balance_kp: float = 20.0
    balance_kd: float = 4.0
    balance_max: float = 3.0

    # depth sensor
    num_rays: int = 32
    ray_half_fov_deg: float = 60.0
    max_range: float = 3.0
    depth_noise: float = 0.01

    # rewards
    action_penalty: float = 0.01
    action_penalty_cap: float = 3.0

    # wall
    wall_distance_min: float = 0.5
    wall_distance_max: float = 0.9
    wall_height: float = 2.0
    wall_perturbations: bool = True
    wall_impulse_min: float = 0.6
    wall_impulse_max: float = 1.5
    wall_first_impulse_min: int = 10
    wall_first_impulse_max: int = 30
    wall_impulse_gap_min: int = 40
    wall_impulse_gap_max: int = 80
    wall_contact_damping: float = 0.2
    wall_restoring_accel: float = 6.0
    wall_upright_angle: float = 0.15
    wall_upright_reward: float = 0.1

    # ball
    ball_spawn_x_min: float = 2.4
    ball_spawn_x_max: float = 2.8
    ball_height_min: float = 0.5
    ball_height_max: float = 1.1
    ball_speed_min: float = 1.0
    ball_speed_max: float = 2.0
    ball_radius: float = 0.1
    ball_block_radius: float = 0.12
    ball_body_x: float = 0.1
    ball_block_reward: float = 1.0
    ball_hit_penalty: float = -1.0

    # arch
    arch_start_min: float = 1.0
    arch_start_max: float = 2.0
    arch_depth: float = 0.4
    arch_clearance_min: float = 0.9
    arch_clearance_max: float = 1.2
    arch_lintel_thickness: float = 0.15
    arch_speed: float = 0.5
    arch_progress_reward: float = 0.05
    arch_collision_penalty: float = -1.0

    def to_kv(self) -> Dict[str, Any]:
        return {PREFIX + f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_kv(cls, values: Mapping[str, Any]) -> "EnvConfig":
        """Build from a resolved mapping; keys without the `env.` prefix are ignored."""
        resolved = resolve_run_config(
            {k: v for k, v in values.items() if k.startswith(PREFIX)},
            defaults=cls().to_kv(),
        )
        return cls(**{k[len(PREFIX):]: v for k, v in resolved.items()})

    @classmethod
    def load(cls, path) -> "EnvConfig":
        return cls.from_kv(load_kv_file(path))

    def dump(self) -> str:
        return dump_kv(self.to_kv())

    def config_hash(self) -> bytes:
        """8-byte fingerprint stored in dataset headers."""
        return short_hash(self.dump())

    def with_overrides(self, **changes) -> "EnvConfig":
        return replace(self, **changes)

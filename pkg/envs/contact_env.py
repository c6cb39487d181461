"""
Planar contact tasks: support the wall, block the ball, traverse the arch.

The environment is functional: `reset` and `step` return new immutable
`EnvState`s and never mutate their inputs. All randomness is drawn from
generators seeded by (episode seed, task, purpose, counter), so a state plus
an action sequence fully determines the future.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from models.env_types import TaskKind, Action, EnvState, Observation, StepResult
from utils.error_handler import EpisodeFinishedError
from .config import EnvConfig
from .raycast import raycast_depth

logger = logging.getLogger(__name__)

_RESET, _SENSOR, _RESPAWN = 0, 1, 2


def _stream(seed: int, task: TaskKind, purpose: int, counter: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, task.code, purpose, int(counter)])


def _rate_limit(current: float, target: float, max_delta: float) -> float:
    return current + float(np.clip(target - current, -max_delta, max_delta))


def _segment_point_distance(p0: Tuple[float, float], p1: Tuple[float, float], q: Tuple[float, float]) -> float:
    """Closest distance between point q and segment p0-p1."""
    d = np.subtract(p1, p0)
    length_sq = float(d @ d)
    if length_sq == 0.0:
        return float(np.hypot(q[0] - p0[0], q[1] - p0[1]))
    s = float(np.clip(np.dot(np.subtract(q, p0), d) / length_sq, 0.0, 1.0))
    closest = np.add(p0, s * d)
    return float(np.hypot(q[0] - closest[0], q[1] - closest[1]))


class ContactEnv:
    """Stateless simulator over EnvState values."""

    def __init__(self, config: Optional[EnvConfig] = None):
        self.config = config or EnvConfig()

    # ── action mapping ─────────────────────────────────────
    def denormalize(self, action) -> Tuple[float, float, float]:
        """Map a normalized action in [-1, 1]^3 to (hand_x, hand_z, body_height) targets in meters."""
        c = self.config
        a = np.clip(np.asarray(action, dtype=np.float64).reshape(3), -1.0, 1.0)
        span = (a + 1.0) / 2.0
        return (c.reach_x_min + span[0] * (c.reach_x_max - c.reach_x_min),
                c.reach_z_min + span[1] * (c.reach_z_max - c.reach_z_min),
                c.height_min + span[2] * (c.height_max - c.height_min))

    def normalize(self, hand_x: float, hand_z: float, body_height: float) -> np.ndarray:
        c = self.config
        return np.array([
            2.0 * (hand_x - c.reach_x_min) / (c.reach_x_max - c.reach_x_min) - 1.0,
            2.0 * (hand_z - c.reach_z_min) / (c.reach_z_max - c.reach_z_min) - 1.0,
            2.0 * (body_height - c.height_min) / (c.height_max - c.height_min) - 1.0,
        ])

    def hand_world(self, state: EnvState) -> Tuple[float, float]:
        """Hand position in the world frame; the body frame pivots about the feet by the lean angle."""
        c, s = np.cos(state.lean), np.sin(state.lean)
        return (state.body_x + state.hand_x * c + state.hand_z * s,
                -state.hand_x * s + state.hand_z * c)

    # ── episode lifecycle ──────────────────────────────────
    def reset(self, task: TaskKind, seed: int) -> Tuple[EnvState, Observation]:
        c = self.config
        if task is TaskKind.MIXED:
            task = TaskKind.concrete()[int(np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF).integers(3))]
        rng = _stream(seed, task, _RESET)
        hand_x, hand_z, height = self.denormalize(np.zeros(3))
        state = EnvState(task=task, seed=int(seed), body_height=height, hand_x=hand_x, hand_z=hand_z)

        if task is TaskKind.WALL:
            state = state.evolve(
                wall_distance=float(rng.uniform(c.wall_distance_min, c.wall_distance_max)),
                impulses=self._impulse_schedule(rng) if c.wall_perturbations else (),
            )
        elif task is TaskKind.BALL:
            state = state.evolve(**self._spawn_ball(rng, state.body_x))
        elif task is TaskKind.ARCH:
            state = state.evolve(**self._spawn_arch(rng, state.body_x))
        return state, self.observe(state)

    def _impulse_schedule(self, rng: np.random.Generator) -> Tuple[Tuple[int, float], ...]:
        c = self.config
        schedule = []
        t = int(rng.integers(c.wall_first_impulse_min, c.wall_first_impulse_max + 1))
        while t < c.max_steps:
            schedule.append((t, float(rng.uniform(c.wall_impulse_min, c.wall_impulse_max))))
            t += int(rng.integers(c.wall_impulse_gap_min, c.wall_impulse_gap_max + 1))
        return tuple(schedule)

    def _spawn_ball(self, rng: np.random.Generator, body_x: float) -> dict:
        c = self.config
        return {
            'ball_x': body_x + float(rng.uniform(c.ball_spawn_x_min, c.ball_spawn_x_max)),
            'ball_z': float(rng.uniform(c.ball_height_min, c.ball_height_max)),
            'ball_speed': float(rng.uniform(c.ball_speed_min, c.ball_speed_max)),
        }

    def _spawn_arch(self, rng: np.random.Generator, body_x: float) -> dict:
        c = self.config
        return {
            'arch_x': body_x + float(rng.uniform(c.arch_start_min, c.arch_start_max)),
            'arch_clearance': float(rng.uniform(c.arch_clearance_min, c.arch_clearance_max)),
        }

    def observe(self, state: EnvState) -> Observation:
        depth = raycast_depth(state, self.config, _stream(state.seed, state.task, _SENSOR, state.step_index))
        proprio = np.array([state.hand_x, state.hand_z, state.body_height, state.lean, state.lean_rate,
                            *state.prev_action])
        return Observation(depth=depth, proprio=proprio)

    # ── dynamics ───────────────────────────────────────────
    def low_level_track(self, state: EnvState, action, dt: Optional[float] = None) -> EnvState:
        """First-order rate-limited tracking of the commanded hand position and body height."""
        c = self.config
        dt = c.dt if dt is None else dt
        target_x, target_z, target_h = self.denormalize(action.to_array() if isinstance(action, Action) else action)
        return state.evolve(
            hand_x=_rate_limit(state.hand_x, target_x, c.hand_speed * dt),
            hand_z=_rate_limit(state.hand_z, target_z, c.hand_speed * dt),
            body_height=_rate_limit(state.body_height, target_h, c.height_speed * dt),
        )

    def _advance_lean(self, state: EnvState, info: dict) -> EnvState:
        c = self.config
        theta, rate = state.lean, state.lean_rate
        for step, magnitude in state.impulses:
            if step == state.step_index:
                rate += magnitude
                info['impulse'] = magnitude

        accel = (c.gravity / c.lean_length) * np.sin(theta)
        accel += float(np.clip(-c.balance_kp * theta - c.balance_kd * rate, -c.balance_max, c.balance_max))

        contact = False
        if state.task is TaskKind.WALL:
            hand_x, _ = self.hand_world(state)
            wall_x = state.body_x + state.wall_distance
            info['hand_to_wall'] = wall_x - hand_x
            if hand_x >= wall_x and (theta > 0 or rate > 0):
                contact = True
                if rate > 0:
                    rate *= c.wall_contact_damping
                accel -= c.wall_restoring_accel * float(np.clip(theta / c.wall_upright_angle, 0.0, 1.0))
        info['wall_contact'] = contact

        rate = rate + accel * c.dt
        theta = theta + rate * c.dt
        return state.evolve(lean=float(theta), lean_rate=float(rate))

    def _advance_ball(self, state: EnvState, info: dict) -> Tuple[EnvState, float, bool]:
        c = self.config
        x0 = state.ball_x
        x1 = x0 - state.ball_speed * c.dt
        distance = _segment_point_distance((x0, state.ball_z), (x1, state.ball_z), self.hand_world(state))
        info['hand_to_ball'] = distance
        if distance <= c.ball_block_radius:
            info['blocked'] = True
            respawn = self._spawn_ball(_stream(state.seed, state.task, _RESPAWN, state.respawns), state.body_x)
            return state.evolve(respawns=state.respawns + 1, **respawn), c.ball_block_reward, False
        info['blocked'] = False
        state = state.evolve(ball_x=x1)
        if x1 <= state.body_x + c.ball_body_x:
            return state, c.ball_hit_penalty, True
        return state, 0.0, False

    def _advance_arch(self, state: EnvState, info: dict) -> Tuple[EnvState, float, bool]:
        c = self.config
        state = state.evolve(body_x=state.body_x + c.arch_speed * c.dt)
        under = state.arch_x <= state.body_x <= state.arch_x + c.arch_depth
        head = state.body_height + c.head_offset
        info['under_arch'] = under
        info['head_margin'] = state.arch_clearance - head
        if under and head > state.arch_clearance:
            info['head_contact'] = True
            return state, c.arch_collision_penalty, True
        info['head_contact'] = False
        if state.body_x > state.arch_x + c.arch_depth:
            respawn = self._spawn_arch(_stream(state.seed, state.task, _RESPAWN, state.respawns), state.body_x)
            state = state.evolve(respawns=state.respawns + 1, **respawn)
        return state, c.arch_progress_reward, False

    def action_penalty(self, action: np.ndarray, previous) -> float:
        c = self.config
        return c.action_penalty * min(float(np.linalg.norm(action - np.asarray(previous))), c.action_penalty_cap)

    def step(self, state: EnvState, action) -> StepResult:
        """Advance one control period. Stepping a finished episode raises EpisodeFinishedError."""
        if state.finished:
            raise EpisodeFinishedError(
                f"Episode (task={state.task.value}, seed={state.seed}) already finished at step {state.step_index}")
        c = self.config
        a = np.clip(action.to_array() if isinstance(action, Action) else np.asarray(action, dtype=np.float64),
                    -1.0, 1.0).reshape(3)
        info = {}

        tracked = self.low_level_track(state, a)
        moved = self._advance_lean(tracked, info)

        reward, done = 0.0, False
        if moved.task is TaskKind.WALL:
            if abs(moved.lean) < c.wall_upright_angle:
                reward = c.wall_upright_reward
        elif moved.task is TaskKind.BALL:
            moved, reward, done = self._advance_ball(moved, info)
        elif moved.task is TaskKind.ARCH:
            moved, reward, done = self._advance_arch(moved, info)

        if abs(moved.lean) >= c.fall_angle:
            info['fell'] = True
            reward, done = (0.0 if moved.task is TaskKind.WALL else reward), True

        reward -= self.action_penalty(a, state.prev_action)
        step_index = state.step_index + 1
        truncated = (not done) and step_index >= c.max_steps
        new_state = moved.evolve(step_index=step_index, prev_action=tuple(float(v) for v in a),
                                 done=done, truncated=truncated)
        if done:
            logger.debug("Episode ended: task=%s seed=%s step=%d", state.task.value, state.seed, step_index)
        return StepResult(state=new_state, observation=self.observe(new_state), reward=float(reward),
                          done=done, truncated=truncated, info=info)

"""
Interpretability exports: value maps over hand targets, open-loop prediction
dumps, latent dumps and the prediction-error report.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from diffcore import no_grad
from envs import ContactEnv
from models import Dataset, LatentState, NoiseMode, Objective, PlanConfig, TaskKind, Trajectory
from planner import rollout_candidates, score_candidates
from utils.csv_io import write_csv, read_csv
from utils.error_handler import ShapeError
from worldmodel import ModelSnapshot, filter_sequence, open_loop_rollout
from .pgm import write_pgm

logger = logging.getLogger(__name__)


# ── value maps ─────────────────────────────────────────────
@dataclass
class QValueMap:
    """scores[i, j]: objective for the constant plan reaching hand (xs[j], zs[i])."""
    xs: np.ndarray
    zs: np.ndarray
    body_height: float
    scores: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.scores.shape

    def argmax(self) -> Tuple[float, float]:
        i, j = np.unravel_index(int(np.argmax(self.scores)), self.scores.shape)
        return float(self.xs[j]), float(self.zs[i])

    def write_csv(self, path) -> int:
        """One header row of x coordinates, then one row per z (lowest z first)."""
        header = [f"{x:.4f}" for x in self.xs]
        return write_csv(path, header, (list(row) for row in self.scores))

    def write_pgm(self, path) -> None:
        # image rows run top-down, so the highest z goes first
        write_pgm(path, self.scores[::-1])


def qvalue_map(snapshot: ModelSnapshot, filtered: LatentState, env: ContactEnv,
               grid: Tuple[int, int] = (40, 40), body_height: Optional[float] = None,
               plan_config: Optional[PlanConfig] = None) -> QValueMap:
    """
    Score a lattice of hand targets over the reachable box. Every cell is the
    constant action sequence commanding that hand position, scored with the
    averaged objective after termination masking, with prior means for the
    imagined latents so the map is deterministic.
    """
    plan_config = (plan_config or PlanConfig()).with_overrides(objective=Objective.JAVG, noise_mode=NoiseMode.MEAN)
    c = env.config
    nx, nz = grid
    height = c.height_min + 0.5 * (c.height_max - c.height_min) if body_height is None else body_height
    xs = np.linspace(c.reach_x_min, c.reach_x_max, nx)
    zs = np.linspace(c.reach_z_min, c.reach_z_max, nz)

    targets = np.array([env.normalize(x, z, height) for z in zs for x in xs])
    actions = np.repeat(np.clip(targets, -1.0, 1.0)[:, None, :], plan_config.horizon, axis=1)
    model = snapshot.model
    params = snapshot.inference_params(plan_config.dtype)
    outputs = rollout_candidates(model, params, filtered, actions, plan_config)
    _, score = score_candidates(Objective.JAVG, outputs.q_hat, outputs.d_hat, None,
                                plan_config.gamma, plan_config.termination_threshold,
                                plan_config.mask_trigger_step)
    return QValueMap(xs=xs, zs=zs, body_height=float(height),
                     scores=np.asarray(score, dtype=np.float64).reshape(nz, nx))


def filtered_latent_at(snapshot: ModelSnapshot, trajectory: Trajectory, t: int, dtype=np.float64) -> LatentState:
    """Deterministic posterior latent after observing o_0..o_t."""
    if not 0 <= t < trajectory.horizon:
        raise ShapeError(f"step {t} outside trajectory of length {trajectory.horizon}")
    states = filter_sequence(snapshot.model, snapshot.inference_params(dtype),
                             trajectory.observations[:t + 1], trajectory.actions[:t])
    return states[-1]


# ── open-loop dumps ────────────────────────────────────────
def dump_rollout(snapshot: ModelSnapshot, trajectory: Trajectory, out_dir, start: int = 0,
                 horizon: int = 16) -> List[Path]:
    """
    Decode the reconstruction of o_start and `horizon` prior-driven predictions,
    plus the ground truth o_start..o_start+horizon.

    Each of the horizon + 2 artifacts (reconstruction, predictions, ground-truth
    strip) is written as a CSV and as a PGM strip sharing one gray scale.
    """
    if start < 0 or start + horizon >= trajectory.horizon:
        raise ShapeError(f"rollout {start}+{horizon} does not fit a trajectory of length {trajectory.horizon}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = snapshot.inference_params(np.float64)
    h0 = filtered_latent_at(snapshot, trajectory, start).h
    actions = trajectory.actions[start:start + horizon]
    rollout = open_loop_rollout(snapshot.model, params, trajectory.observations[start], actions, start_h=h0)
    truth = np.asarray(trajectory.observations[start:start + horizon + 1], dtype=np.float64)

    both = np.concatenate([rollout.predictions, truth])
    value_range = (float(both.min()), float(both.max()))
    columns = [f"o{i}" for i in range(truth.shape[1])]
    written: List[Path] = []
    for k, frame in enumerate(rollout.predictions):
        stem = out_dir / f"horizon_{k:02d}"
        write_csv(stem.with_suffix(".csv"), columns, [frame.tolist()])
        write_pgm(stem.with_suffix(".pgm"), frame[None, :], value_range)
        written += [stem.with_suffix(".csv"), stem.with_suffix(".pgm")]
    stem = out_dir / "ground_truth"
    write_csv(stem.with_suffix(".csv"), columns, (row.tolist() for row in truth))
    write_pgm(stem.with_suffix(".pgm"), truth, value_range)
    written += [stem.with_suffix(".csv"), stem.with_suffix(".pgm")]
    logger.info("Wrote %d-step rollout dump to %s", horizon, out_dir)
    return written


@dataclass
class RolloutAccuracy:
    """Per-horizon open-loop prediction MSE next to the copy-last-observation baseline."""
    model_mse: np.ndarray
    baseline_mse: np.ndarray
    episodes: int

    COLUMNS = ("horizon", "model_mse", "baseline_mse")

    def rows(self) -> List[List[float]]:
        return [[k, float(m), float(b)] for k, (m, b) in enumerate(zip(self.model_mse, self.baseline_mse))]

    def write_csv(self, path) -> int:
        return write_csv(path, self.COLUMNS, self.rows())


def rollout_mse(snapshot: ModelSnapshot, dataset: Dataset, horizon: int = 16, start: int = 0) -> RolloutAccuracy:
    """
    Open-loop MSE at horizons 0..K over every episode that is still running at
    start + K. The baseline predicts o_start for every future step.
    """
    usable = np.nonzero(dataset.lengths >= start + horizon + 1)[0]
    if len(usable) == 0:
        raise ShapeError(f"no episode runs for {start + horizon + 1} steps")
    model = snapshot.model
    params = snapshot.inference_params(np.float64)
    obs = np.asarray(dataset.observations[usable], dtype=np.float64).transpose(1, 0, 2)
    act = np.asarray(dataset.actions[usable], dtype=np.float64).transpose(1, 0, 2)

    h0 = filter_sequence(model, params, obs[:start + 1], act[:start])[-1].h
    rollout = open_loop_rollout_batch(snapshot, obs[start], act[start:start + horizon], h0)
    truth = obs[start:start + horizon + 1]
    model_mse = np.mean((rollout - truth) ** 2, axis=(1, 2))
    baseline_mse = np.mean((truth[:1] - truth) ** 2, axis=(1, 2))
    return RolloutAccuracy(model_mse=model_mse, baseline_mse=baseline_mse, episodes=len(usable))


def open_loop_rollout_batch(snapshot: ModelSnapshot, observations: np.ndarray, actions: np.ndarray,
                            start_h: np.ndarray) -> np.ndarray:
    """Batched open-loop decoding: observations (B, obs), actions (K, B, act) -> (K+1, B, obs)."""
    model = snapshot.model
    params = snapshot.inference_params(np.float64)
    with no_grad():
        h = np.asarray(start_h, dtype=np.float64)
        _, z = model.posterior(params, h, observations)
        frames = [model.decode(params, h, z).mean.data]
        for action in actions:
            h = model.recurrence(params, h, z, action).data
            _, z = model.prior(params, h)
            frames.append(model.decode(params, h, z).mean.data)
    return np.stack(frames)


# ── latent dumps ───────────────────────────────────────────
def latent_columns(h_dim: int, z_dim: int) -> List[str]:
    return ["task", "t"] + [f"h{i}" for i in range(h_dim)] + [f"z{i}" for i in range(z_dim)]


def dump_latents(snapshot: ModelSnapshot, dataset: Dataset, path) -> int:
    """One row per (episode, step) in episode-major order; deterministic posterior means."""
    model = snapshot.model
    c = model.config
    params = snapshot.inference_params(np.float64)
    obs = np.asarray(dataset.observations, dtype=np.float64).transpose(1, 0, 2)
    act = np.asarray(dataset.actions, dtype=np.float64).transpose(1, 0, 2)
    states = filter_sequence(model, params, obs, act)
    h = np.stack([s.h for s in states], axis=1)
    z = np.stack([s.z for s in states], axis=1)

    def rows():
        for b in range(len(dataset)):
            task = TaskKind.from_code(int(dataset.tasks[b])).value
            for t in range(obs.shape[0]):
                yield [task, t, *h[b, t].tolist(), *z[b, t].tolist()]

    count = write_csv(path, latent_columns(c.h_dim, c.z_dim), rows())
    logger.info("Wrote %d latent rows to %s", count, path)
    return count


def latent_centroids(path) -> Tuple[Dict[str, np.ndarray], Dict[Tuple[str, str], float]]:
    """Per-task mean z from a latent dump, and the pairwise Euclidean distances between them."""
    rows = read_csv(path)
    header, data = rows[0], rows[1:]
    z_cols = [i for i, name in enumerate(header) if name.startswith("z")]
    by_task: Dict[str, List[List[float]]] = {}
    for row in data:
        by_task.setdefault(row[0], []).append([float(row[i]) for i in z_cols])
    centroids = {task: np.mean(values, axis=0) for task, values in sorted(by_task.items())}
    names = list(centroids)
    distances = {
        (a, b): float(np.linalg.norm(centroids[a] - centroids[b]))
        for i, a in enumerate(names) for b in names[i + 1:]
    }
    return centroids, distances

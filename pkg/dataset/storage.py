"""
LCD1 dataset files.

Header (little-endian): b"LCD1" | version u32 | episodes u32 | T u32 |
obs_dim u32 | act_dim u32 | gamma f64 | env_hash 8 bytes.
Each record: task u8 | seed u64 | steps u32 | float32 [steps x (obs + act + 2)]
(observation, action, reward, done) | float64 mc_return [steps].
"""

import logging
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from models import Dataset, DatasetHeader, DATASET_VERSION, OBS_DIM, ACTION_DIM
from utils.error_handler import (
    StorageError, FormatVersionError, DimensionMismatchError, TruncatedFileError,
    with_error_handling, ErrorType,
)

logger = logging.getLogger(__name__)

MAGIC = b"LCD1"
_HEADER = struct.Struct("<4s5Id8s")
_RECORD = struct.Struct("<BQI")


def _read_exact(stream: BinaryIO, size: int, what: str) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise TruncatedFileError(f"Dataset file ends inside {what}")
    return data


@with_error_handling(ErrorType.STORAGE)
def save(dataset: Dataset, path) -> None:
    h = dataset.header
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "wb") as f:
            f.write(_HEADER.pack(MAGIC, h.version, len(dataset), h.horizon, h.obs_dim, h.act_dim,
                                 float(h.gamma), bytes(h.env_hash)))
            for i in range(len(dataset)):
                payload = np.concatenate([
                    dataset.observations[i],
                    dataset.actions[i],
                    dataset.rewards[i][:, None],
                    dataset.dones[i][:, None],
                ], axis=1).astype("<f4")
                f.write(_RECORD.pack(int(dataset.tasks[i]), int(dataset.seeds[i]), h.horizon))
                f.write(payload.tobytes())
                f.write(np.asarray(dataset.mc_returns[i], dtype="<f8").tobytes())
    except OSError as e:
        raise StorageError(f"Cannot write dataset to {path}: {e}") from e
    logger.info("Saved %d trajectories to %s", len(dataset), path)


def _lengths_from_dones(dones: np.ndarray) -> np.ndarray:
    terminal = dones > 0.5
    any_done = terminal.any(axis=1)
    first = np.argmax(terminal, axis=1)
    return np.where(any_done, first + 1, dones.shape[1]).astype(np.uint32)


@with_error_handling(ErrorType.STORAGE)
def load(path, obs_dim: int = OBS_DIM, act_dim: int = ACTION_DIM) -> Dataset:
    """
    Read an LCD1 file.

    Raises:
        FormatVersionError: bad magic bytes or unsupported version
        DimensionMismatchError: header or record dimensions inconsistent
        TruncatedFileError: file ends before the declared records
    """
    with open(Path(path), "rb") as f:
        raw = f.read(_HEADER.size)
        if len(raw) < 4 or raw[:4] != MAGIC:
            raise FormatVersionError(f"{path} is not an LCD1 dataset (bad magic bytes)")
        if len(raw) != _HEADER.size:
            raise TruncatedFileError(f"{path}: header is truncated")
        _, version, episodes, horizon, file_obs, file_act, gamma, env_hash = _HEADER.unpack(raw)
        if version != DATASET_VERSION:
            raise FormatVersionError(f"{path}: dataset version {version}, expected {DATASET_VERSION}")
        if file_obs != obs_dim or file_act != act_dim:
            raise DimensionMismatchError(
                f"{path}: header dims obs={file_obs} act={file_act}, expected obs={obs_dim} act={act_dim}")

        width = obs_dim + act_dim + 2
        tasks = np.zeros(episodes, dtype=np.uint8)
        seeds = np.zeros(episodes, dtype=np.uint64)
        payloads = np.zeros((episodes, horizon, width), dtype=np.float32)
        mc_returns = np.zeros((episodes, horizon), dtype=np.float64)
        for i in range(episodes):
            task, seed, steps = _RECORD.unpack(_read_exact(f, _RECORD.size, f"record {i} header"))
            if steps != horizon:
                raise DimensionMismatchError(f"{path}: record {i} has {steps} steps, header declares T={horizon}")
            tasks[i], seeds[i] = task, seed
            payloads[i] = np.frombuffer(_read_exact(f, 4 * steps * width, f"record {i} payload"),
                                        dtype="<f4").reshape(steps, width)
            mc_returns[i] = np.frombuffer(_read_exact(f, 8 * steps, f"record {i} returns"), dtype="<f8")
        if f.read(1):
            raise DimensionMismatchError(f"{path}: trailing bytes after {episodes} declared records")

    dones = payloads[:, :, obs_dim + act_dim + 1].copy()
    header = DatasetHeader(episodes=episodes, horizon=horizon, obs_dim=obs_dim, act_dim=act_dim,
                           gamma=gamma, env_hash=env_hash, version=version)
    return Dataset(
        header=header,
        tasks=tasks,
        seeds=seeds,
        lengths=_lengths_from_dones(dones),
        observations=payloads[:, :, :obs_dim].copy(),
        actions=payloads[:, :, obs_dim:obs_dim + act_dim].copy(),
        rewards=payloads[:, :, obs_dim + act_dim].copy(),
        dones=dones,
        mc_returns=mc_returns,
    )

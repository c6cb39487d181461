"""
Offline world-model training: Adam over shuffled sub-sequences.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from diffcore import AdamState, adam_step
from diffcore.tensor import Value
from models import Dataset, LossBreakdown
from utils.csv_io import write_csv
from utils.error_handler import (
    IncompatibleModelError, NumericalError, with_error_handling, ErrorType,
)
from utils.structured_logger import get_structured_logger, log_training_epoch
from .config import ModelConfig
from .loss import SequenceBatch, loss_sequence
from .network import WorldModel

logger = logging.getLogger(__name__)

_WINDOW_STREAM = 1
_NOISE_STREAM = 2


@dataclass
class TrainingResult:
    params: Dict[str, np.ndarray]
    history: List[LossBreakdown] = field(default_factory=list)
    updates: int = 0
    duration_s: float = 0.0

    def log_rows(self) -> List[list]:
        return [[epoch + 1] + item.values() for epoch, item in enumerate(self.history)]

    def write_log(self, path) -> int:
        """Per-epoch loss CSV: epoch, total, rec_obs, rec_term, jep, q (, reward)."""
        columns = self.history[0].columns() if self.history else LossBreakdown(0, 0, 0, 0, 0).columns()
        return write_csv(Path(path), ["epoch"] + columns, self.log_rows())


def check_dataset(dataset: Dataset, config: ModelConfig) -> None:
    h = dataset.header
    if h.obs_dim != config.obs_dim or h.act_dim != config.act_dim:
        raise IncompatibleModelError(
            f"Dataset dims obs={h.obs_dim} act={h.act_dim} do not match model obs={config.obs_dim} act={config.act_dim}")


def training_windows(dataset: Dataset, seq_len: int, rng: np.random.Generator) -> np.ndarray:
    """
    Non-overlapping (row, start) windows behind a random per-episode offset,
    keeping only windows that begin on a valid step. Returned shuffled.
    """
    horizon = dataset.header.horizon
    windows = []
    for row in range(len(dataset)):
        span = horizon - seq_len
        offset = int(rng.integers(0, min(seq_len, span + 1))) if span > 0 else 0
        for start in range(offset, span + 1, seq_len):
            if start < int(dataset.lengths[row]):
                windows.append((row, start))
    windows = np.array(windows, dtype=np.int64).reshape(-1, 2)
    return windows[rng.permutation(len(windows))]


@with_error_handling(ErrorType.NUMERIC)
def train(dataset: Dataset, config: ModelConfig,
          initial_params: Optional[Dict[str, np.ndarray]] = None,
          log_path=None) -> TrainingResult:
    """
    Train a world model; the result is a pure function of (dataset, config).

    Raises:
        IncompatibleModelError: dataset dimensions differ from the config
        NumericalError: the loss became non-finite
    """
    check_dataset(dataset, config)
    model = WorldModel(config)
    params = dict(initial_params) if initial_params is not None else model.init_params(config.seed)
    model.check_params(params)
    adam = AdamState.for_params(params, lr=config.learning_rate)
    window_rng = np.random.default_rng([config.seed, _WINDOW_STREAM])
    noise_rng = np.random.default_rng([config.seed, _NOISE_STREAM])
    seq_len = min(config.seq_len, dataset.header.horizon)
    max_norm = config.grad_clip if config.grad_clip > 0 else None

    slog = get_structured_logger("worldmodel")
    result = TrainingResult(params=params)
    started = time.perf_counter()
    for epoch in range(config.epochs):
        windows = training_windows(dataset, seq_len, window_rng)
        batches = [windows[i:i + config.batch_size] for i in range(0, len(windows), config.batch_size)]
        if config.max_updates_per_epoch > 0:
            batches = batches[:config.max_updates_per_epoch]

        losses = []
        with slog.performance_timer("train_epoch", epoch=epoch + 1, updates=len(batches)):
            for chunk in batches:
                batch = SequenceBatch.from_dataset(dataset, chunk[:, 0], chunk[:, 1], seq_len)
                noise = noise_rng.standard_normal((batch.batch_size, seq_len, config.z_dim))
                leaves = {name: Value(value, name=name) for name, value in params.items()}
                total, breakdown = loss_sequence(model, leaves, batch, noise)
                if not np.isfinite(breakdown.total):
                    raise NumericalError(f"Non-finite training loss at epoch {epoch + 1}, update {result.updates}")
                total.backward()
                grads = {name: leaf.grad for name, leaf in leaves.items()}
                params, adam = adam_step(adam, params, grads, max_grad_norm=max_norm)
                losses.append(breakdown)
                result.updates += 1

        epoch_loss = LossBreakdown.mean(losses) if losses else LossBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)
        result.history.append(epoch_loss)
        log_training_epoch(epoch + 1, **epoch_loss.to_dict())
        logger.info("epoch %d/%d total=%.4f rec_obs=%.4f rec_term=%.4f jep=%.4f q=%.4f",
                    epoch + 1, config.epochs, epoch_loss.total, epoch_loss.rec_obs,
                    epoch_loss.rec_term, epoch_loss.jep, epoch_loss.q)

    result.params = params
    result.duration_s = time.perf_counter() - started
    if log_path is not None:
        result.write_log(log_path)
    return result

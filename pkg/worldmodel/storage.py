"""
Model files: an LWM1 parameter table followed by a CFG1 block.

    CFG1 block: b"CFG1" | length u32 | UTF-8 JSON {"model": {...}, "dataset_hash": hex, "env_hash": hex}
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from diffcore.serialization import write_params, read_params
from utils.error_handler import (
    StorageError, FormatVersionError, DimensionMismatchError, TruncatedFileError,
    IncompatibleModelError, with_error_handling, ErrorType,
)
from .config import ModelConfig
from .network import WorldModel, cast_params

logger = logging.getLogger(__name__)

CONFIG_MAGIC = b"CFG1"


@dataclass
class ModelSnapshot:
    """Trained parameters with the configuration and data they came from; read-only after loading."""
    config: ModelConfig
    params: Dict[str, np.ndarray]
    dataset_hash: str = ""
    env_hash: str = ""
    _cast_cache: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict, repr=False, compare=False)

    @property
    def model(self) -> WorldModel:
        return WorldModel(self.config)

    @property
    def has_reward_head(self) -> bool:
        return self.config.enable_reward_head

    def inference_params(self, dtype=np.float32) -> Dict[str, np.ndarray]:
        key = np.dtype(dtype).name
        if key not in self._cast_cache:
            self._cast_cache[key] = cast_params(self.params, dtype)
        return self._cast_cache[key]

    def check_env(self, env_hash: str) -> None:
        """Refuse to plan in an environment other than the one the data came from."""
        if self.env_hash and env_hash and self.env_hash != env_hash:
            raise IncompatibleModelError(
                f"Model was trained on environment {self.env_hash}, current environment is {env_hash}")


@with_error_handling(ErrorType.STORAGE)
def save_model(path, snapshot: ModelSnapshot) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    block = json.dumps({
        'model': snapshot.config.to_dict(),
        'dataset_hash': snapshot.dataset_hash,
        'env_hash': snapshot.env_hash,
    }, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as f:
            write_params(f, snapshot.params)
            f.write(CONFIG_MAGIC)
            f.write(struct.pack("<I", len(block)))
            f.write(block)
    except OSError as e:
        raise StorageError(f"Cannot write model to {path}: {e}") from e
    logger.info("Saved world model (%d tensors) to %s", len(snapshot.params), path)


@with_error_handling(ErrorType.STORAGE)
def load_model(path, expected: Optional[ModelConfig] = None) -> ModelSnapshot:
    """
    Read a model file and validate every parameter shape against its own
    configuration block (and against `expected` architecture when given).
    """
    with open(Path(path), "rb") as f:
        params = read_params(f)
        magic = f.read(4)
        if magic != CONFIG_MAGIC:
            if len(magic) < 4:
                raise TruncatedFileError(f"{path}: model file has no configuration block")
            raise FormatVersionError(f"{path}: bad configuration block magic {magic!r}")
        raw_len = f.read(4)
        if len(raw_len) != 4:
            raise TruncatedFileError(f"{path}: configuration block length is truncated")
        (length,) = struct.unpack("<I", raw_len)
        payload = f.read(length)
        if len(payload) != length:
            raise TruncatedFileError(f"{path}: configuration block is truncated")
        if f.read(1):
            raise DimensionMismatchError(f"{path}: trailing bytes after configuration block")

    try:
        block = json.loads(payload.decode("utf-8"))
        config = ModelConfig.from_dict(block['model'])
    except (ValueError, KeyError, TypeError) as e:
        raise FormatVersionError(f"{path}: unreadable configuration block: {e}") from e

    shapes = WorldModel(config).param_shapes()
    missing = sorted(set(shapes) - set(params))
    extra = sorted(set(params) - set(shapes))
    if missing or extra:
        raise DimensionMismatchError(f"{path}: parameters differ from configuration (missing={missing}, extra={extra})")
    for name, shape in shapes.items():
        if params[name].shape != shape:
            raise DimensionMismatchError(f"{path}: '{name}' has shape {params[name].shape}, expected {shape}")
    if expected is not None and expected.architecture() != config.architecture():
        raise IncompatibleModelError(f"{path}: model architecture differs from the requested configuration")

    return ModelSnapshot(config=config, params=params,
                         dataset_hash=block.get('dataset_hash', ""), env_hash=block.get('env_hash', ""))

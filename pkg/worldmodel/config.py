"""
World-model sizes and training hyperparameters.
"""

from dataclasses import dataclass, asdict, replace, fields
from typing import Dict, Any, Mapping, Tuple

from config.settings import parse_int_list
from models import OBS_DIM, ACTION_DIM
from utils.error_handler import UsageError


@dataclass(frozen=True)
class ModelConfig:
    obs_dim: int = OBS_DIM
    act_dim: int = ACTION_DIM
    h_dim: int = 128
    z_dim: int = 32
    encoder_widths: Tuple[int, ...] = (256, 128)
    decoder_widths: Tuple[int, ...] = (128, 256)
    head_widths: Tuple[int, ...] = (128, 64)
    posterior_width: int = 128

    # training
    learning_rate: float = 3e-4
    batch_size: int = 16
    seq_len: int = 32
    epochs: int = 30
    grad_clip: float = 100.0
    max_updates_per_epoch: int = 0
    enable_reward_head: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("obs_dim", "act_dim", "h_dim", "z_dim", "posterior_width", "batch_size", "seq_len"):
            if getattr(self, name) <= 0:
                raise UsageError(f"model.{name} must be positive, got {getattr(self, name)}")
        for name in ("encoder_widths", "decoder_widths", "head_widths"):
            widths = tuple(int(w) for w in getattr(self, name))
            if not widths or any(w <= 0 for w in widths):
                raise UsageError(f"model.{name} must be a non-empty list of positive widths, got {widths}")
            object.__setattr__(self, name, widths)
        if self.epochs < 0:
            raise UsageError(f"model.epochs must be >= 0, got {self.epochs}")

    @property
    def encoding_dim(self) -> int:
        return self.encoder_widths[-1]

    def with_overrides(self, **changes) -> "ModelConfig":
        return replace(self, **changes)

    def architecture(self) -> Dict[str, Any]:
        """Fields that determine parameter shapes."""
        keys = ("obs_dim", "act_dim", "h_dim", "z_dim", "encoder_widths", "decoder_widths",
                "head_widths", "posterior_width", "enable_reward_head")
        return {key: getattr(self, key) for key in keys}

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for name in ("encoder_widths", "decoder_widths", "head_widths"):
            data[name] = list(data[name])
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"Unknown model config fields: {unknown}")
        values = dict(data)
        for name in ("encoder_widths", "decoder_widths", "head_widths"):
            if name in values:
                raw = values[name]
                values[name] = tuple(parse_int_list(raw) if isinstance(raw, str) else raw)
        return cls(**values)

    @classmethod
    def from_run_config(cls, run: Mapping[str, Any]) -> "ModelConfig":
        """Build from resolved `model.*` keys plus `run.seed`."""
        values = {key[len("model."):]: value for key, value in run.items() if key.startswith("model.")}
        values['seed'] = int(run.get("run.seed", 0))
        return cls.from_dict(values)

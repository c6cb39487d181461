# config/settings.py

import os
from pathlib import Path
from typing import Dict, Any, Optional, Mapping

from dotenv import load_dotenv, dotenv_values

from utils.error_handler import UsageError

# ──────────────────────────────────────────────────────────────
# Load environment variables from .env
# ──────────────────────────────────────────────────────────────
load_dotenv()


class Config:
    # ──────────────────────────────────────────────────────────
    # Logging
    # ──────────────────────────────────────────────────────────
    LOG_LEVEL       = os.getenv("LOG_LEVEL", "INFO").upper()
    LOG_DIR         = os.getenv("LOG_DIR", "logs")
    STRUCTURED_LOGS = os.getenv("STRUCTURED_LOGS", "True").lower() == "true"

    # ──────────────────────────────────────────────────────────
    # Outputs / reproducibility
    # ──────────────────────────────────────────────────────────
    OUTPUT_DIR   = os.getenv("OUTPUT_DIR", "runs")
    DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", 0))

    # ──────────────────────────────────────────────────────────
    # Parallelism (results never depend on these)
    # ──────────────────────────────────────────────────────────
    PLAN_WORKERS    = int(os.getenv("PLAN_WORKERS", 1))
    COLLECT_WORKERS = int(os.getenv("COLLECT_WORKERS", 1))


# ──────────────────────────────────────────────────────────────
# Agent-specific configurations
# Used by BaseAgent.__init__; must be imported from config/__init__.py
# ──────────────────────────────────────────────────────────────
AGENT_CONFIGS: Dict[str, Dict[str, Any]] = {
    "random_delta": {
        "eta": 0.32,
        "initial_action": [0.0, 0.0, 0.0],
    },
    "value_mpc": {
        "filter_mode": "mean",
        "warm_start": True,
    },
}


# ──────────────────────────────────────────────────────────────
# Run defaults: every key a command may consume.
# Flat "group.name" keys; the type of each default is the type a
# config-file or flag value is coerced to.
# ──────────────────────────────────────────────────────────────
RUN_DEFAULTS: Dict[str, Any] = {
    # collection
    "collect.task": "wall",
    "collect.episodes": 100,
    "collect.steps": 200,
    "collect.gamma": 0.95,
    "collect.eta": 0.32,
    "collect.workers": Config.COLLECT_WORKERS,
    # world model
    "model.h_dim": 128,
    "model.z_dim": 32,
    "model.encoder_widths": "256,128",
    "model.decoder_widths": "128,256",
    "model.head_widths": "128,64",
    "model.posterior_width": 128,
    "model.learning_rate": 3e-4,
    "model.batch_size": 16,
    "model.seq_len": 32,
    "model.epochs": 30,
    "model.grad_clip": 100.0,
    "model.max_updates_per_epoch": 0,
    "model.enable_reward_head": False,
    # planner
    "plan.num_candidates": 1024,
    "plan.horizon": 4,
    "plan.cem_iterations": 6,
    "plan.elites": 64,
    "plan.init_std": 0.32,
    "plan.min_std": 0.02,
    "plan.termination_threshold": 0.9,
    "plan.objective": "javg",
    "plan.gamma": 0.95,
    "plan.noise_mode": "sampled",
    "plan.mask_trigger_step": False,
    "plan.precision": "float32",
    "plan.chunk_size": 256,
    "plan.workers": Config.PLAN_WORKERS,
    # evaluation
    "eval.task": "wall",
    "eval.episodes": 10,
    "eval.seeds": 3,
    "eval.horizons": "4",
    "eval.objectives": "javg",
    "eval.include_random": True,
    # analysis
    "analysis.trials": 100000,
    "analysis.grid": "40x40",
    "analysis.rollout_horizon": 16,
    # general
    "run.seed": Config.DEFAULT_SEED,
}


def _coerce(key: str, raw: Any, default: Any) -> Any:
    """Coerce a raw (usually string) value to the type of its default."""
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise UsageError(f"Config key '{key}' expects {type(default).__name__}, got '{raw}'")
    return text


def load_kv_file(path: str) -> Dict[str, Optional[str]]:
    """
    Read a flat `key = value` text file (comments with '#').

    Parsed with python-dotenv so quoting and comment rules match .env files.
    """
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")
    return dict(dotenv_values(p))


def dump_kv(values: Mapping[str, Any]) -> str:
    """Render a mapping as sorted `key = value` lines."""
    lines = []
    for key in sorted(values):
        value = values[key]
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def resolve_run_config(file_values: Optional[Mapping[str, Any]] = None,
                       flag_values: Optional[Mapping[str, Any]] = None,
                       defaults: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    """
    Merge defaults <- config file <- command-line flags.

    Every key must be known; unknown keys are a usage error.
    """
    defaults = dict(RUN_DEFAULTS if defaults is None else defaults)
    resolved = dict(defaults)
    for source in (file_values or {}, flag_values or {}):
        for key, raw in source.items():
            if key not in defaults:
                raise UsageError(f"Unknown config key: '{key}'")
            if raw is None:
                continue
            resolved[key] = _coerce(key, raw, defaults[key])
    return resolved


def parse_int_list(text: str) -> list:
    """'1,2,4' -> [1, 2, 4]"""
    try:
        return [int(part) for part in str(text).split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"Expected a comma-separated integer list, got '{text}'")


def parse_grid(text: str) -> tuple:
    """'40x40' -> (40, 40)"""
    try:
        nx, nz = (int(part) for part in str(text).lower().split("x"))
    except ValueError:
        raise UsageError(f"Expected a grid like '40x40', got '{text}'")
    if nx < 1 or nz < 1:
        raise UsageError(f"Grid dimensions must be positive, got '{text}'")
    return nx, nz

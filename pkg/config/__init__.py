# config/__init__.py

"""
Configuration module for the contact world-model project
"""

from .settings import (
    Config,
    AGENT_CONFIGS,
    RUN_DEFAULTS,
    load_kv_file,
    dump_kv,
    resolve_run_config,
    parse_int_list,
    parse_grid,
)

__all__ = [
    'Config', 'AGENT_CONFIGS', 'RUN_DEFAULTS',
    'load_kv_file', 'dump_kv', 'resolve_run_config',
    'parse_int_list', 'parse_grid',
]

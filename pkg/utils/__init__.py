"""
Utility modules: logging, error handling, counter-based rng, CSV and hashing helpers
"""

from .error_handler import (
    ErrorHandler,
    ErrorType,
    ErrorSeverity,
    WorldModelError,
    UsageError,
    StorageError,
    IncompatibilityError,
    ShapeError,
    with_error_handling,
)

__all__ = [
    'ErrorHandler', 'ErrorType', 'ErrorSeverity',
    'WorldModelError', 'UsageError', 'StorageError', 'IncompatibilityError', 'ShapeError',
    'with_error_handling',
]

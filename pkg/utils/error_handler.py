import logging
import time
import traceback
from typing import Dict, Any, Optional, Callable
from datetime import datetime
from enum import Enum
from functools import wraps


class ErrorType(Enum):
    """Enumeration of error types for categorization"""
    USAGE = "usage"
    STORAGE = "storage"
    INCOMPATIBLE = "incompatible"
    SHAPE = "shape"
    ENVIRONMENT = "environment"
    NUMERIC = "numeric"
    GENERAL = "general"


class ErrorSeverity(Enum):
    """Error severity levels"""
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


# ──────────────────────────────────────────────────────────────
# Exception hierarchy
# ──────────────────────────────────────────────────────────────
class WorldModelError(Exception):
    """Base class for every error raised by this project."""
    error_type = ErrorType.GENERAL
    exit_code = 1


class UsageError(WorldModelError):
    """Bad flags, unknown config keys, invalid arguments."""
    error_type = ErrorType.USAGE
    exit_code = 2


class StorageError(WorldModelError):
    """File could not be read or written."""
    error_type = ErrorType.STORAGE
    exit_code = 3


class FormatVersionError(StorageError):
    """Magic bytes or format version do not match."""


class DimensionMismatchError(StorageError):
    """Header dimensions disagree with a record or with a configuration."""


class TruncatedFileError(StorageError):
    """File ended before all declared records were read."""


class IncompatibilityError(WorldModelError):
    """Model, dataset and environment do not fit together."""
    error_type = ErrorType.INCOMPATIBLE
    exit_code = 4


class IncompatibleModelError(IncompatibilityError):
    """Model lacks a capability the request needs (e.g. reward head)."""


class ShapeError(WorldModelError, ValueError):
    """Array shapes or vector dimensions do not chain."""
    error_type = ErrorType.SHAPE


class EpisodeFinishedError(WorldModelError, RuntimeError):
    """step() called on an episode that already ended."""
    error_type = ErrorType.ENVIRONMENT


class NumericalError(WorldModelError, ArithmeticError):
    """A loss or latent state stopped being finite."""
    error_type = ErrorType.NUMERIC


class ErrorHandler:
    """Centralized error logging"""

    def __init__(self, logger_name: str = "ErrorHandler"):
        self.logger = logging.getLogger(logger_name)

    def log_error(self,
                  error: Exception,
                  error_type: Optional[ErrorType] = None,
                  severity: ErrorSeverity = ErrorSeverity.MEDIUM,
                  context: Optional[Dict[str, Any]] = None,
                  user_message: Optional[str] = None) -> str:
        """
        Log error with detailed information and context

        Args:
            error: The exception that occurred
            error_type: Type of error for categorization (derived from the exception if omitted)
            severity: Severity level of the error
            context: Additional context information
            user_message: User-friendly error message

        Returns:
            Error ID for tracking
        """
        if error_type is None:
            error_type = getattr(error, "error_type", ErrorType.GENERAL)

        error_id = f"ERR_{int(time.time())}_{id(error)}"
        error_details = {
            'error_id': error_id,
            'timestamp': datetime.now().isoformat(),
            'error_type': error_type.value,
            'severity': severity.value,
            'exception_type': type(error).__name__,
            'exception_message': str(error),
            'traceback': traceback.format_exc(),
            'context': context or {},
            'user_message': user_message
        }

        log_message = self._format_log_message(error_details)

        if severity == ErrorSeverity.CRITICAL:
            self.logger.critical(log_message)
        elif severity == ErrorSeverity.HIGH:
            self.logger.error(log_message)
        elif severity == ErrorSeverity.MEDIUM:
            self.logger.warning(log_message)
        else:
            self.logger.info(log_message)

        return error_id

    def _format_log_message(self, error_details: Dict[str, Any]) -> str:
        """Format error details into a readable log message"""
        context_str = ""
        if error_details['context']:
            context_items = [f"{k}={v}" for k, v in error_details['context'].items()]
            context_str = f" | Context: {', '.join(context_items)}"

        return (f"[{error_details['error_id']}] "
                f"{error_details['error_type'].upper()} ERROR "
                f"({error_details['severity'].upper()}): "
                f"{error_details['exception_type']}: {error_details['exception_message']}"
                f"{context_str}")

    @staticmethod
    def exit_code_for(error: BaseException) -> int:
        """
        Map an exception onto the stable CLI exit codes.

        0 ok, 2 usage, 3 I/O, 4 incompatibility; anything unexpected is 1.
        """
        if isinstance(error, WorldModelError):
            return error.exit_code
        if isinstance(error, (FileNotFoundError, PermissionError, IsADirectoryError, OSError)):
            return StorageError.exit_code
        return 1


def with_error_handling(error_type: ErrorType = ErrorType.GENERAL,
                        severity: ErrorSeverity = ErrorSeverity.HIGH):
    """
    Decorator that logs any escaping exception with context, then re-raises.

    Args:
        error_type: Type used when the exception carries none
        severity: Severity to log at

    Returns:
        Decorated function
    """
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except Exception as e:
                handler = ErrorHandler(f"{func.__module__}.{func.__name__}")
                handler.log_error(
                    e,
                    getattr(e, "error_type", error_type),
                    severity,
                    {'function': func.__name__, 'module': func.__module__}
                )
                raise

        return wrapper
    return decorator

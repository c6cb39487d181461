"""
Structured logging for data collection, training, planning and analysis runs
"""

import json
import logging
import time
import threading
from datetime import datetime
from typing import Dict, Any, Optional, Union
from enum import Enum
from pathlib import Path
from contextlib import contextmanager
import uuid

from config.settings import Config


class LogLevel(Enum):
    """Log levels for structured logging"""
    DEBUG = "debug"
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"
    CRITICAL = "critical"


class LogCategory(Enum):
    """Categories for different types of logs"""
    COLLECTION = "collection"
    TRAINING = "training"
    PLANNING = "planning"
    ANALYSIS = "analysis"
    PERFORMANCE = "performance"
    SYSTEM = "system"


LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: Optional[str] = None, log_dir: Optional[str] = None) -> None:
    """Configure the root logger: console plus a plain-text file under LOG_DIR."""
    level_name = (level or Config.LOG_LEVEL).upper()
    handlers = [logging.StreamHandler()]
    log_dir = log_dir or Config.LOG_DIR
    if Config.STRUCTURED_LOGS:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(Path(log_dir) / "app.log", encoding="utf-8"))
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


class StructuredLogger:
    """
    JSON-lines logger for experiment events and performance metrics
    """

    def __init__(self, name: str, log_dir: Optional[str] = None, enabled: Optional[bool] = None):
        self.name = name
        self.enabled = Config.STRUCTURED_LOGS if enabled is None else enabled
        self.log_dir = Path(log_dir or Config.LOG_DIR)
        if self.enabled:
            self.log_dir.mkdir(parents=True, exist_ok=True)

        # Thread-local storage for context
        self._local = threading.local()

        self._setup_loggers()
        self._active_operations = {}

    def _setup_loggers(self):
        """Setup one logger per output file"""
        self.event_logger = self._create_logger("events", self.log_dir / "events.log")
        self.performance_logger = self._create_logger("performance", self.log_dir / "performance.log")

    def _create_logger(self, name: str, log_file: Path) -> logging.Logger:
        """Create a logger with JSON formatting"""
        logger = logging.getLogger(f"{self.name}.{name}")
        logger.setLevel(logging.DEBUG)

        # Remove existing handlers to avoid duplicates
        for handler in logger.handlers[:]:
            logger.removeHandler(handler)

        if self.enabled:
            file_handler = logging.FileHandler(log_file, encoding='utf-8')
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(JsonFormatter())
            logger.addHandler(file_handler)
        else:
            logger.addHandler(logging.NullHandler())
        logger.propagate = False

        return logger

    def set_context(self, **context):
        """Set context for current thread"""
        if not hasattr(self._local, 'context'):
            self._local.context = {}
        self._local.context.update(context)

    def get_context(self) -> Dict[str, Any]:
        """Get current thread context"""
        if not hasattr(self._local, 'context'):
            self._local.context = {}
        return self._local.context.copy()

    def _create_log_entry(self,
                          level: LogLevel,
                          category: LogCategory,
                          message: str,
                          **kwargs) -> Dict[str, Any]:
        """Create a structured log entry"""
        entry = {
            'timestamp': datetime.now().isoformat(),
            'level': level.value,
            'category': category.value,
            'logger': self.name,
            'message': message,
            'thread_id': threading.get_ident(),
            'context': self.get_context()
        }
        entry.update(kwargs)
        return entry

    def log_event(self,
                  category: LogCategory,
                  event: str,
                  level: LogLevel = LogLevel.INFO,
                  **details):
        """Log a domain event (episode collected, epoch finished, ...)"""
        entry = self._create_log_entry(
            level=level,
            category=category,
            message=f"{category.value}: {event}",
            event=event,
            details=details
        )
        self._log_to_logger(self.event_logger, level, entry)

    def log_performance_metric(self,
                               metric_name: str,
                               value: Union[int, float],
                               unit: str = "ms",
                               operation: Optional[str] = None,
                               level: LogLevel = LogLevel.INFO,
                               **metadata):
        """Log performance metric"""
        entry = self._create_log_entry(
            level=level,
            category=LogCategory.PERFORMANCE,
            message=f"Performance Metric: {metric_name}",
            metric_name=metric_name,
            value=value,
            unit=unit,
            operation=operation,
            metadata=metadata
        )
        self._log_to_logger(self.performance_logger, level, entry)

    def _log_to_logger(self, logger: logging.Logger, level: LogLevel, entry: Dict[str, Any]):
        """Log entry to specific logger"""
        if not self.enabled:
            return
        log_method = getattr(logger, level.value)
        log_method(json.dumps(entry, ensure_ascii=False, default=str))

    @contextmanager
    def performance_timer(self, operation_name: str, **metadata):
        """Context manager for timing operations"""
        operation_id = str(uuid.uuid4())
        start_time = time.perf_counter()
        self._active_operations[operation_id] = {
            'name': operation_name,
            'start_time': start_time,
            'metadata': metadata
        }
        try:
            yield operation_id
        finally:
            duration_ms = (time.perf_counter() - start_time) * 1000
            self.log_performance_metric(
                metric_name=f"{operation_name}_duration",
                value=duration_ms,
                unit="ms",
                operation=operation_name,
                operation_id=operation_id,
                **metadata
            )
            self._active_operations.pop(operation_id, None)


class JsonFormatter(logging.Formatter):
    """JSON formatter for structured logging"""

    def format(self, record):
        # If the message is already JSON, return it as-is
        try:
            json.loads(record.getMessage())
            return record.getMessage()
        except (json.JSONDecodeError, ValueError):
            entry = {
                'timestamp': datetime.fromtimestamp(record.created).isoformat(),
                'level': record.levelname.lower(),
                'logger': record.name,
                'message': record.getMessage(),
                'module': record.module,
                'function': record.funcName,
                'line': record.lineno
            }
            if record.exc_info:
                entry['exception'] = self.formatException(record.exc_info)
            return json.dumps(entry, ensure_ascii=False, default=str)


# Global logger instances
_loggers: Dict[str, StructuredLogger] = {}
_loggers_lock = threading.Lock()


def get_structured_logger(name: str) -> StructuredLogger:
    """Get or create a structured logger instance"""
    with _loggers_lock:
        if name not in _loggers:
            _loggers[name] = StructuredLogger(name)
        return _loggers[name]


# Convenience functions for common logging patterns
def log_command_start(command: str, **details):
    """Log CLI command start"""
    logger = get_structured_logger("cli")
    logger.set_context(command=command)
    logger.log_event(LogCategory.SYSTEM, "command_start", **details)


def log_command_complete(command: str, status: str, duration_s: float, **details):
    """Log CLI command completion"""
    logger = get_structured_logger("cli")
    logger.log_event(
        LogCategory.SYSTEM,
        "command_complete",
        level=LogLevel.INFO if status == "success" else LogLevel.ERROR,
        status=status,
        duration_s=duration_s,
        **details
    )


def log_collection_episode(task: str, episode: int, steps: int, episode_return: float, terminated: bool):
    """Log one collected episode"""
    logger = get_structured_logger("dataset")
    logger.log_event(
        LogCategory.COLLECTION,
        "episode_collected",
        level=LogLevel.DEBUG,
        task=task,
        episode=episode,
        steps=steps,
        episode_return=episode_return,
        terminated=terminated
    )


def log_training_epoch(epoch: int, **losses):
    """Log per-epoch loss breakdown"""
    logger = get_structured_logger("worldmodel")
    logger.log_event(LogCategory.TRAINING, "epoch_complete", epoch=epoch, **losses)


def log_plan_summary(objective: str, horizon: int, **metrics):
    """Log an evaluation summary row"""
    logger = get_structured_logger("planner")
    logger.log_event(LogCategory.PLANNING, "evaluation_summary",
                     objective=objective, horizon=horizon, **metrics)


def log_bound_report(**report):
    """Log one variance-bound check (a BoundReport row)"""
    logger = get_structured_logger("analysis")
    logger.log_event(
        LogCategory.ANALYSIS,
        "bound_checked",
        level=LogLevel.INFO if report.get("pass", True) else LogLevel.WARNING,
        **report
    )

"""
Centralized logging configuration for PyPinnKF.
Records carry the id of the experiment run that emitted them, so lines coming
from concurrent population workers stay attributable.
"""

import logging
import os
from pathlib import Path
from typing import Optional
from logging.handlers import RotatingFileHandler
import contextvars

from dotenv import load_dotenv

import pypinnkf.core.constants as const

load_dotenv()

# ---- Configuration from environment ----
LOG_LEVEL = os.getenv("PYPINNKF_LOG_LEVEL", "INFO").upper()
LOG_FILE = os.getenv("PYPINNKF_LOG_FILE", None)
LOG_FORMAT = os.getenv(
    "PYPINNKF_LOG_FORMAT",
    "%(asctime)s | %(name)s | %(levelname)-8s | [%(run_id)s] | %(message)s"
)

# ---- Run ID tracking ----
_run_id: contextvars.ContextVar[str] = contextvars.ContextVar('run_id', default='N/A')

class RunIdFilter(logging.Filter):
    """Add the active run ID to all log records."""
    def filter(self, record):
        record.run_id = _run_id.get()
        return True

def set_run_id(run_id: str) -> contextvars.Token:
    """
    Set the run ID for the current context.

    Worker threads started through `asyncio.to_thread` copy the context, so a
    run ID set by the experiment manager shows up on every worker line.
    Returns the token needed by `reset_run_id`.
    """
    return _run_id.set(run_id)

def reset_run_id(token: contextvars.Token) -> None:
    _run_id.reset(token)

# ---- Module-level logger cache ----
_LOGGERS: dict[str, logging.Logger] = {}

def _setup_root_logger() -> logging.Logger:
    """Configure the root logger with console and optional file handlers."""
    root = logging.getLogger(const.PACKAGE_NAME)

    # Avoid duplicate handlers
    if root.handlers:
        return root

    root.setLevel(LOG_LEVEL)

    run_filter = RunIdFilter()

    # ---- Console Handler ----
    console_handler = logging.StreamHandler()
    console_handler.setLevel(LOG_LEVEL)
    console_formatter = logging.Formatter(LOG_FORMAT)
    console_handler.setFormatter(console_formatter)
    console_handler.addFilter(run_filter)
    root.addHandler(console_handler)

    # ---- File Handler (rotating) ----
    if LOG_FILE:
        log_path = Path(LOG_FILE)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = RotatingFileHandler(
            log_path,
            mode="a",
            maxBytes=10 * const.ONE_MB,
            backupCount=5,
            encoding="utf-8"
        )
        file_handler.setLevel(LOG_LEVEL)
        file_handler.setFormatter(console_formatter)
        file_handler.addFilter(run_filter)
        root.addHandler(file_handler)

    return root

def get_logger(name: Optional[str] = None) -> logging.Logger:
    """
    Get a logger for a module.

    Args:
        name: Module name (typically __name__). If None, returns root logger.

    Returns:
        logging.Logger: Configured logger instance.
    """
    if name is None:
        return _setup_root_logger()

    if name not in _LOGGERS:
        root = _setup_root_logger()
        _LOGGERS[name] = root.getChild(name.split(".")[-1])

    return _LOGGERS[name]

def set_log_level(level: str) -> None:
    """Dynamically change log level at runtime."""
    level = level.upper()
    root = logging.getLogger(const.PACKAGE_NAME)
    root.setLevel(level)
    for handler in root.handlers:
        handler.setLevel(level)

"""
Logging for wickstate.

Handlers live on the ``wickstate`` package logger; every module logs through a child
logger from get_logger.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import Optional

PACKAGE_LOGGER = "wickstate"
_FORMAT = "%(asctime)s %(levelname)-8s %(name)s: %(message)s"


def setup_logging(level: Optional[str] = None, log_file: Optional[Path] = None) -> None:
    """
    Attach a stderr handler, and a file handler when ``log_file`` is set, to the package logger.

    Calling it again replaces the previous handlers. ``level`` defaults to the configured one;
    unknown names fall back to INFO.
    """
    if level is None:
        from .config import get_config

        level = get_config().log_level
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        numeric = logging.INFO

    logger = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    for handler in handlers:
        handler.setFormatter(logging.Formatter(_FORMAT))
        logger.addHandler(handler)
    logger.setLevel(numeric)


def get_logger(name: str) -> logging.Logger:
    """Logger for a wickstate module (pass __name__)."""
    if not logging.getLogger(PACKAGE_LOGGER).handlers:
        setup_logging(level="INFO")
    return logging.getLogger(name)

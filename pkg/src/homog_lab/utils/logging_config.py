"""Logging configuration for homog-lab.

Centralized logging setup with a console handler and an optional file
handler. Console output goes to stderr so that command tables printed on
stdout stay machine-readable.

Every record carries the short hash of the experiment being run, so log
files from several runs can be told apart. RuntimeWarnings raised by numpy
and scipy during assembly or simulation are routed into the same handlers.

Example:
    >>> from homog_lab.utils.logging_config import bind_run, setup_logging
    >>> setup_logging(level="INFO", log_file="homog.log")
    >>> bind_run(config.digest)
    >>> logging.getLogger(__name__).info("Corrector ladder started")
"""

import logging
import sys
from typing import Optional

DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - [%(run)s] %(message)s"
RUN_ID_LENGTH = 12
NO_RUN = "-"


class RunContextFilter(logging.Filter):
    """Stamps records with the short hash of the active experiment."""

    def __init__(self) -> None:
        super().__init__()
        self.run = NO_RUN

    def filter(self, record: logging.LogRecord) -> bool:
        record.__dict__["run"] = self.run
        return True


_run_filter = RunContextFilter()


def bind_run(config_hash: Optional[str]) -> None:
    """Attach an experiment hash to subsequent records (None clears it)."""
    _run_filter.run = config_hash[:RUN_ID_LENGTH] if config_hash else NO_RUN


def setup_logging(
    level: str = "INFO",
    log_file: Optional[str] = None,
    format_string: Optional[str] = None,
) -> None:
    """Configure logging for the application.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL).
            Unknown names fall back to INFO
        log_file: Optional path to a log file. If None, only console logging
        format_string: Optional custom format string; may use %(run)s

    Example:
        >>> setup_logging(level="DEBUG")
        >>> logging.getLogger("homog_lab").debug("assembling")
    """
    log_level = getattr(logging, level.upper(), logging.INFO)
    formatter = logging.Formatter(
        format_string or DEFAULT_FORMAT, datefmt="%Y-%m-%d %H:%M:%S"
    )

    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, mode="a", encoding="utf-8"))

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    # Replace handlers so repeated CLI invocations in one process don't stack
    root_logger.handlers.clear()
    for handler in handlers:
        handler.setLevel(log_level)
        handler.setFormatter(formatter)
        handler.addFilter(_run_filter)
        root_logger.addHandler(handler)

    logging.captureWarnings(True)
    root_logger.debug(
        f"Logging configured: level={level}, file={log_file or 'console only'}"
    )


def get_logger(name: str) -> logging.Logger:
    """Logger for a module name (typically __name__)."""
    return logging.getLogger(name)

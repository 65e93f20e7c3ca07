"""Runtime configuration for homog-lab.

Configuration classes for the different environments (Development,
Production, Testing). Values come from environment variables, loaded with
python-dotenv so a local `.env` file can set them.

Runtime settings only control *how* work is executed (logging, worker
count, output location). Numerical parameters live in the experiment
config file, see `homog_lab.cli.schema`.

Example:
    >>> from homog_lab.config import get_config
    >>> config = get_config("testing")
    >>> config.LOG_LEVEL
    'DEBUG'
"""

import os
from typing import Optional, Type

from dotenv import load_dotenv

load_dotenv()

VALID_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class Config:
    """Base configuration class with common settings.

    Attributes:
        ENVIRONMENT: Environment name
        LOG_LEVEL: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        LOG_FILE: Optional log file path
        THREADS: Default worker count for grid and path parallelism
        BLOCK_SIZE: Paths per simulation block. Fixed per run, so results
            never depend on THREADS
        OUTPUT_DIR: Default output directory for command artifacts
        VERSION: Application version
    """

    ENVIRONMENT: str = "development"
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_FILE: Optional[str] = os.getenv("LOG_FILE") or None
    THREADS: int = int(os.getenv("HOMOG_THREADS", "1"))
    BLOCK_SIZE: int = int(os.getenv("HOMOG_BLOCK_SIZE", "1024"))
    OUTPUT_DIR: str = os.getenv("HOMOG_OUTPUT_DIR", "homog_output")
    VERSION: str = "0.1.0"
    TESTING: bool = False

    def validate(self) -> None:
        """Validate configuration values.

        Raises:
            ValueError: If a setting is out of range
        """
        if self.LOG_LEVEL.upper() not in VALID_LOG_LEVELS:
            raise ValueError(
                f"LOG_LEVEL must be one of {VALID_LOG_LEVELS} (got {self.LOG_LEVEL})"
            )
        if self.THREADS < 1:
            raise ValueError(f"HOMOG_THREADS must be >= 1 (got {self.THREADS})")
        if self.BLOCK_SIZE < 1:
            raise ValueError(f"HOMOG_BLOCK_SIZE must be >= 1 (got {self.BLOCK_SIZE})")


class DevelopmentConfig(Config):
    """Development environment configuration with verbose logging."""

    ENVIRONMENT = "development"
    LOG_LEVEL = os.getenv("LOG_LEVEL", "DEBUG")


class ProductionConfig(Config):
    """Production configuration for long batch runs.

    Logs warnings only and defaults to all available cores.
    """

    ENVIRONMENT = "production"
    LOG_LEVEL = os.getenv("LOG_LEVEL", "WARNING")
    THREADS = int(os.getenv("HOMOG_THREADS", str(os.cpu_count() or 1)))


class TestingConfig(Config):
    """Testing environment configuration.

    Small blocks so that tests exercise the multi-block merge path.
    """

    ENVIRONMENT = "testing"
    TESTING = True
    LOG_LEVEL = "DEBUG"
    THREADS = 1
    BLOCK_SIZE = 64


config_by_name: dict[str, Type[Config]] = {
    "development": DevelopmentConfig,
    "production": ProductionConfig,
    "testing": TestingConfig,
}


def get_config(config_name: Optional[str] = None) -> Config:
    """Get configuration instance for the specified environment.

    Args:
        config_name: Name of configuration environment
            ('development', 'production', 'testing'). Defaults to the
            HOMOG_ENV variable, then 'development'

    Returns:
        Configuration instance for the specified environment

    Raises:
        ValueError: If config_name is not valid

    Example:
        >>> config = get_config("production")
        >>> config.validate()
    """
    name = config_name or os.getenv("HOMOG_ENV", "development")
    if name not in config_by_name:
        raise ValueError(
            f"Invalid config name: {name}. "
            f"Must be one of: {list(config_by_name.keys())}"
        )
    return config_by_name[name]()

"""Unit tests for runtime configuration and logging setup."""

import logging

import pytest

from homog_lab.config import (
    DevelopmentConfig,
    ProductionConfig,
    TestingConfig,
    get_config,
)
from homog_lab.utils.logging_config import bind_run, get_logger, setup_logging


@pytest.mark.unit
class TestGetConfig:
    """Test get_config."""

    def test_named_environments(self) -> None:
        """Test that each name maps to its class."""
        assert isinstance(get_config("development"), DevelopmentConfig)
        assert isinstance(get_config("production"), ProductionConfig)
        assert isinstance(get_config("testing"), TestingConfig)

    def test_testing_config_uses_small_blocks(self) -> None:
        """Test the testing defaults."""
        config = get_config("testing")

        assert config.BLOCK_SIZE == 64
        assert config.THREADS == 1
        assert config.LOG_LEVEL == "DEBUG"
        assert config.TESTING

    def test_environment_variable_selects_config(self, monkeypatch) -> None:
        """Test that HOMOG_ENV is used when no name is given."""
        monkeypatch.setenv("HOMOG_ENV", "testing")

        assert isinstance(get_config(), TestingConfig)

    def test_invalid_name_raises(self) -> None:
        """Test that unknown environments are rejected."""
        with pytest.raises(ValueError) as exc_info:
            get_config("staging")

        assert "Invalid config name" in str(exc_info.value)


@pytest.mark.unit
class TestConfigValidation:
    """Test Config.validate."""

    def test_testing_config_is_valid(self) -> None:
        """Test that the shipped testing config validates."""
        get_config("testing").validate()

    @pytest.mark.parametrize(
        "attribute,value,message",
        [
            ("LOG_LEVEL", "LOUD", "LOG_LEVEL"),
            ("THREADS", 0, "HOMOG_THREADS"),
            ("BLOCK_SIZE", 0, "HOMOG_BLOCK_SIZE"),
        ],
    )
    def test_out_of_range_settings(self, attribute, value, message) -> None:
        """Test that each invalid setting raises ValueError."""
        config = get_config("testing")
        setattr(config, attribute, value)

        with pytest.raises(ValueError, match=message):
            config.validate()


@pytest.mark.unit
class TestLoggingSetup:
    """Test setup_logging."""

    def test_level_and_console_handler(self, restore_root_logger) -> None:
        """Test that one stderr handler is installed at the requested level."""
        setup_logging(level="WARNING")

        assert restore_root_logger.level == logging.WARNING
        assert len(restore_root_logger.handlers) == 1

    def test_repeated_setup_does_not_stack(self, restore_root_logger) -> None:
        """Test that calling setup twice keeps a single handler."""
        setup_logging(level="INFO")
        setup_logging(level="INFO")

        assert len(restore_root_logger.handlers) == 1

    def test_file_handler(self, restore_root_logger, tmp_path) -> None:
        """Test that a log file receives records."""
        log_file = tmp_path / "homog.log"

        setup_logging(level="DEBUG", log_file=str(log_file))
        get_logger("homog_lab.test").info("ladder started")
        for handler in restore_root_logger.handlers:
            handler.flush()

        assert "ladder started" in log_file.read_text(encoding="utf-8")

    def test_unknown_level_falls_back_to_info(self, restore_root_logger) -> None:
        """Test that an unknown level name means INFO."""
        setup_logging(level="chatty")

        assert restore_root_logger.level == logging.INFO

    def test_records_carry_the_run_hash(self, restore_root_logger, tmp_path) -> None:
        """Test that bound experiment hashes are shortened and can be cleared."""
        # Arrange
        log_file = tmp_path / "homog.log"
        setup_logging(level="INFO", log_file=str(log_file))
        logger = get_logger("homog_lab.test")

        # Act
        logger.info("before")
        bind_run("0123456789abcdef" * 4)
        logger.info("during")
        bind_run(None)
        logger.info("after")
        for handler in restore_root_logger.handlers:
            handler.flush()

        # Assert
        lines = log_file.read_text(encoding="utf-8").splitlines()
        assert lines[0].endswith("[-] before")
        assert lines[1].endswith("[0123456789ab] during")
        assert lines[2].endswith("[-] after")

    def test_custom_format(self, restore_root_logger, tmp_path) -> None:
        """Test that a custom format string replaces the default."""
        log_file = tmp_path / "homog.log"

        setup_logging(
            level="INFO",
            log_file=str(log_file),
            format_string="%(levelname)s|%(message)s",
        )
        get_logger("homog_lab.test").warning("flagged paths")
        for handler in restore_root_logger.handlers:
            handler.flush()

        assert log_file.read_text(encoding="utf-8") == "WARNING|flagged paths\n"

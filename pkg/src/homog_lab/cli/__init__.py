"""Command-line surface: argument parsing, experiment schema, exit codes."""

from homog_lab.cli.app import create_parser, main
from homog_lab.cli.errors import UsageError, exit_code_for
from homog_lab.cli.schema import ExperimentConfig, load_experiment

__all__ = [
    "ExperimentConfig",
    "UsageError",
    "create_parser",
    "exit_code_for",
    "load_experiment",
    "main",
]

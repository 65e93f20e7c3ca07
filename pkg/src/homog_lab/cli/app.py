"""Command-line application for homog-lab.

Flags only select the command, the config file and execution settings;
every numerical parameter lives in the experiment config.

Example:
    $ homog-lab effective --config sine1d.json --out runs/sine1d
    $ homog-lab simulate --config sine1d.json --out runs/sine1d --mode limit
    $ homog-lab sec4 --threads 4
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Optional

from homog_lab.cli.commands import (
    CommandContext,
    cmd_compare,
    cmd_effective,
    cmd_sec4,
    cmd_simulate,
    cmd_validate,
)
from homog_lab.cli.errors import EXIT_USAGE, UsageError, run_guarded
from homog_lab.cli.schema import ExperimentConfig, load_experiment
from homog_lab.config import get_config
from homog_lab.utils.logging_config import bind_run, setup_logging

logger = logging.getLogger(__name__)

COMMANDS: dict[str, Callable[..., int]] = {
    "validate": cmd_validate,
    "effective": cmd_effective,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "sec4": cmd_sec4,
}


def create_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subcommand per pipeline stage."""
    parser = argparse.ArgumentParser(
        prog="homog-lab",
        description="Numerical homogenization of degenerate multiscale diffusions.",
    )
    parser.add_argument(
        "--config-env",
        default=None,
        help="Runtime environment (development, production, testing)",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        summary = (COMMANDS[name].__doc__ or "").split("\n")[0]
        sub = subparsers.add_parser(name, help=summary)
        sub.add_argument("--config", type=Path, default=None, help="Experiment config")
        sub.add_argument("--out", type=Path, default=None, help="Output directory")
        sub.add_argument(
            "--threads", type=int, default=None, help="Worker threads (speed only)"
        )
        sub.add_argument("--log-level", default=None, help="Logging level")
        if name == "simulate":
            sub.add_argument(
                "--mode",
                choices=("eps", "n", "limit"),
                default=None,
                help="Process to simulate (defaults to the config's mode)",
            )
    return parser


def _experiment(args: argparse.Namespace) -> ExperimentConfig:
    """Load the experiment config; only sec4 may run on defaults.

    Raises:
        UsageError: If a command other than sec4 has no --config
    """
    if args.config is None:
        if args.command != "sec4":
            raise UsageError(f"'{args.command}' needs --config")
        return ExperimentConfig()
    return load_experiment(args.config)


def main(argv: Optional[list[str]] = None) -> int:
    """Entry point of the homog-lab console script.

    Returns:
        Exit status: 0 success, 1 failed criteria, 2 usage, 3 numerical
    """
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0

    try:
        runtime = get_config(args.config_env)
        runtime.validate()
    except ValueError as e:
        print(f"homog-lab: {e}", file=sys.stderr)
        return EXIT_USAGE
    setup_logging(level=args.log_level or runtime.LOG_LEVEL, log_file=runtime.LOG_FILE)
    bind_run(None)

    def run() -> int:
        experiment = _experiment(args)
        bind_run(experiment.digest)
        threads = args.threads if args.threads is not None else runtime.THREADS
        if threads < 1:
            raise UsageError(f"--threads must be >= 1 (got {threads})")
        out_dir = args.out or Path(experiment.output_dir or runtime.OUTPUT_DIR)
        context = CommandContext(
            config=experiment,
            out_dir=out_dir,
            threads=threads,
            block_size=runtime.BLOCK_SIZE,
        )
        logger.info(
            f"Running '{args.command}' ({threads} thread(s), output {out_dir})"
        )
        if args.command == "simulate":
            return cmd_simulate(context, args.mode)
        return COMMANDS[args.command](context)

    return run_guarded(run)


if __name__ == "__main__":
    sys.exit(main())

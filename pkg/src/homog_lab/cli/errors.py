"""Exit-code mapping for the homog-lab command line.

Exceptions raised anywhere in a command are converted to exit codes in
one place:

    0  success
    1  an assumption or acceptance criterion failed
    2  usage, configuration or missing-input error
    3  numerical failure

Example:
    >>> from homog_lab.cli.errors import exit_code_for
    >>> exit_code_for(UsageError("no config"))
    2
"""

import logging
from typing import Callable

from pydantic import ValidationError as SchemaError

from homog_lab.core.corrector_service import CorrectorError
from homog_lab.core.effective_service import GeometryViolationError
from homog_lab.core.linalg import InvalidTensorError
from homog_lab.core.sde_engine import SimulationError
from homog_lab.medium.models import MediumError
from homog_lab.utils.io import MissingInputError
from homog_lab.utils.validators import ValidationError

logger = logging.getLogger(__name__)

EXIT_SUCCESS = 0
EXIT_FAILED_CRITERIA = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    """Raised when the command line or the experiment config is unusable."""

    pass


USAGE_ERRORS: tuple[type[Exception], ...] = (
    UsageError,
    ValidationError,
    SchemaError,
    MissingInputError,
    MediumError,
)
NUMERICAL_ERRORS: tuple[type[Exception], ...] = (
    CorrectorError,
    InvalidTensorError,
    GeometryViolationError,
    SimulationError,
)


def exit_code_for(error: Exception) -> int:
    """Exit code of an exception raised by a command.

    Unknown exceptions are not mapped; they propagate.

    Raises:
        Exception: The error itself if it belongs to no known family
    """
    if isinstance(error, USAGE_ERRORS):
        return EXIT_USAGE
    if isinstance(error, NUMERICAL_ERRORS):
        return EXIT_NUMERICAL
    raise error


def run_guarded(command: Callable[[], int]) -> int:
    """Run a command, logging and mapping known exceptions to exit codes."""
    try:
        return command()
    except USAGE_ERRORS as e:
        logger.error(f"Usage error: {e}")
        return exit_code_for(e)
    except NUMERICAL_ERRORS as e:
        logger.error(f"Numerical failure ({type(e).__name__}): {e}")
        return exit_code_for(e)

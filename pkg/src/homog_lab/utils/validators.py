"""Input validation for homog-lab.

Validators for the numerical inputs that cross module boundaries:
- evaluation points (finite, correct dimension)
- positive integers and reals (cutoffs, counts, steps)
- parameter ladders (λ, n, ε, h sequences)

All validators return normalized values or raise ValidationError, the
input-domain error of the package.

Example:
    >>> from homog_lab.utils.validators import validate_ladder
    >>> validate_ladder([1e-1, 1e-2, 1e-3], "lambda_ladder", decreasing=True)
    [0.1, 0.01, 0.001]
"""

from typing import Any, Optional

import numpy as np
import numpy.typing as npt
from pydantic import PositiveFloat, TypeAdapter
from pydantic import ValidationError as PydanticValidationError

_POSITIVE_LADDER = TypeAdapter(list[PositiveFloat])


class ValidationError(Exception):
    """Raised when an input lies outside the domain of an operation."""

    pass


def validate_points(
    value: Any, name: str, dim: int
) -> tuple[npt.NDArray[np.float64], bool]:
    """Validate one point or a batch of points in R^dim.

    Args:
        value: Array-like of shape (dim,) or (N, dim)
        name: Parameter name for error messages
        dim: Expected spatial dimension

    Returns:
        Tuple of (points as float array of shape (N, dim), single flag)

    Raises:
        ValidationError: If the shape is wrong or any entry is not finite

    Example:
        >>> pts, single = validate_points([0.0, 1.0], "x", 2)
        >>> pts.shape, single
        ((1, 2), True)
    """
    try:
        array = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{name} must be numeric") from e

    single = array.ndim <= 1
    if array.ndim == 0:
        array = array.reshape(1)
    points = np.atleast_2d(array)

    if points.ndim != 2 or points.shape[1] != dim:
        raise ValidationError(
            f"{name} must have shape ({dim},) or (N, {dim}), got {array.shape}"
        )
    if not np.all(np.isfinite(points)):
        raise ValidationError(f"{name} contains non-finite values")

    return points, single


def validate_positive_integer(value: Any, name: str, max_value: int = 10**9) -> int:
    """Validate positive integer parameter.

    Args:
        value: Value to validate
        name: Parameter name for error messages
        max_value: Maximum allowed value

    Returns:
        Validated integer value

    Raises:
        ValidationError: If value is not a valid positive integer
    """
    if isinstance(value, bool):
        raise ValidationError(f"{name} must be an integer")
    try:
        int_value = int(value)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{name} must be an integer") from e

    if int_value != value and not isinstance(value, str):
        raise ValidationError(f"{name} must be an integer (got {value})")
    if int_value < 1:
        raise ValidationError(f"{name} must be positive (got {int_value})")
    if int_value > max_value:
        raise ValidationError(f"{name} must be <= {max_value} (got {int_value})")

    return int_value


def validate_positive_real(value: Any, name: str) -> float:
    """Validate a strictly positive finite real.

    Raises:
        ValidationError: If value is not finite and positive
    """
    try:
        real = float(value)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{name} must be a real number") from e

    if not np.isfinite(real) or real <= 0.0:
        raise ValidationError(f"{name} must be finite and positive (got {value})")
    return real


def validate_ladder(
    values: Any,
    name: str,
    decreasing: bool,
    min_length: int = 3,
    max_ratio: Optional[float] = None,
) -> list[float]:
    """Validate a monotone ladder of positive parameters.

    Args:
        values: Sequence of positive reals
        name: Parameter name for error messages
        decreasing: True for λ and ε ladders, False for viscosity ladders
        min_length: Minimum number of entries
        max_ratio: If given, each consecutive ratio (smaller over larger)
            must not exceed it

    Returns:
        Ladder as a list of floats

    Raises:
        ValidationError: If the ladder is too short, not strictly monotone,
            contains non-positive entries or is not geometric enough
    """
    try:
        ladder = _POSITIVE_LADDER.validate_python(list(values))
    except (PydanticValidationError, TypeError) as e:
        raise ValidationError(f"{name} must be a list of positive reals") from e

    if len(ladder) < min_length:
        raise ValidationError(
            f"{name} needs at least {min_length} values (got {len(ladder)})"
        )

    for previous, current in zip(ladder, ladder[1:]):
        ordered = current < previous if decreasing else current > previous
        if not ordered:
            direction = "decreasing" if decreasing else "increasing"
            raise ValidationError(f"{name} must be strictly {direction}: {ladder}")
        if max_ratio is not None:
            ratio = min(previous, current) / max(previous, current)
            if ratio > max_ratio:
                raise ValidationError(
                    f"{name} steps must shrink by a factor <= {max_ratio} "
                    f"(got {previous} -> {current})"
                )

    return [float(v) for v in ladder]

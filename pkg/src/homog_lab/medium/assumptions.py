"""Numerical checks of the structural assumptions on a medium.

`validate_assumptions` samples the torus × y-box and reports the worst
violation of each assumption; `check_microscopic_ergodicity` looks for
non-constant invariant functions of the reference operator
S̃ = ½ Σ D_i(ã_ij D_j) in a finite Fourier space.

Margins are violation magnitudes: 0 when the assumption holds at every
sampled point, positive otherwise.
"""

import logging

import numpy as np
import numpy.typing as npt
import scipy.linalg

from homog_lab.core.galerkin import GalerkinBasis
from homog_lab.core.linalg import matrix_abs_batch, min_eigenvalues
from homog_lab.medium.evaluation import coefficients_batch, sample_grid
from homog_lab.medium.models import (
    CheckResult,
    ErgodicityReport,
    MediumSpec,
    ValidationReport,
)
from homog_lab.utils.validators import ValidationError

FloatArray = npt.NDArray[np.float64]

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-10
NORMALIZATION_TOLERANCE = 1e-6
NULL_SPACE_THRESHOLD = 1e-8
ALIASING_TOLERANCE = 1e-6
LIPSCHITZ_STEPS = (1e-3, 0.25)


def _result(name: str, margin: float, tolerance: float, detail: str) -> CheckResult:
    return CheckResult(
        check_name=name,
        margin=float(max(margin, 0.0)),
        passed=bool(margin <= tolerance),
        detail=detail,
    )


def _control_checks(
    spec: MediumSpec, x: FloatArray, y: FloatArray, tolerance: float
) -> list[CheckResult]:
    sample = coefficients_batch(spec, x, y)
    m = spec.control_constant
    a_tilde = sample.a_tilde

    lower = -min_eigenvalues(sample.a - a_tilde / m)
    upper = -min_eigenvalues(m * a_tilde - sample.a)
    asymmetry = np.abs(sample.h + np.swapaxes(sample.h, 1, 2)).max(axis=(1, 2))
    h_control = -min_eigenvalues(m * a_tilde - matrix_abs_batch(sample.h))

    preset = spec.preset
    dy_sigma = preset.d_sigma_y(x, y)
    sigma = sample.sigma
    dy_a = np.einsum("nkil,njl->nkij", dy_sigma, sigma)
    dy_a = dy_a + np.swapaxes(dy_a, 2, 3)
    dy_h = preset.d_h_y(x, y)
    derivative_control = np.zeros(x.shape[0])
    for k in range(spec.dim):
        for field in (dy_a[:, k], dy_h[:, k]):
            violation = -min_eigenvalues(m * a_tilde - matrix_abs_batch(field))
            derivative_control = np.maximum(derivative_control, violation)

    def located(values: FloatArray) -> str:
        i = int(np.argmax(values))
        return f"worst at x={x[i].round(4).tolist()}, y={y[i].round(4).tolist()}"

    return [
        _result("control_lower", float(lower.max()), tolerance, located(lower)),
        _result("control_upper", float(upper.max()), tolerance, located(upper)),
        _result("antisymmetry", float(asymmetry.max()), tolerance, located(asymmetry)),
        _result("h_control", float(h_control.max()), tolerance, located(h_control)),
        _result(
            "y_derivative_control",
            float(derivative_control.max()),
            tolerance,
            located(derivative_control),
        ),
    ]


def _boundedness_check(
    spec: MediumSpec, x: FloatArray, y: FloatArray, tolerance: float
) -> CheckResult:
    preset = spec.preset
    norms = {
        "sigma": np.abs(preset.sigma(x, y)).max(),
        "sigma_tilde": np.abs(preset.sigma_tilde(x)).max(),
        "h": np.abs(preset.h(x, y)).max(),
        "d_sigma_x": np.abs(preset.d_sigma_x(x, y)).max(),
        "d_sigma_y": np.abs(preset.d_sigma_y(x, y)).max(),
        "d_h_x": np.abs(preset.d_h_x(x, y)).max(),
        "d_h_y": np.abs(preset.d_h_y(x, y)).max(),
    }
    name, largest = max(norms.items(), key=lambda item: item[1])
    return _result(
        "boundedness",
        float(largest) - spec.regularity_constant,
        tolerance,
        f"largest entry {float(largest):.4g} from {name}, "
        f"Lambda={spec.regularity_constant:.4g}",
    )


def _lipschitz_check(
    spec: MediumSpec, x: FloatArray, y: FloatArray, tolerance: float
) -> CheckResult:
    """|σ(·, y + h) − σ(·, y)|² ⪯ Mã|h|² on axis-aligned grid pairs."""
    preset = spec.preset
    sigma = preset.sigma(x, y)
    a_tilde_m = spec.control_constant * coefficients_batch(spec, x, y).a_tilde
    worst = 0.0
    for step in LIPSCHITZ_STEPS:
        for j in range(spec.dim):
            shifted = y.copy()
            shifted[:, j] += step
            delta = (preset.sigma(x, shifted) - sigma) / step
            gram = delta @ np.swapaxes(delta, 1, 2)
            worst = max(worst, float((-min_eigenvalues(a_tilde_m - gram)).max()))
    return _result(
        "lipschitz_y", worst, tolerance, f"steps {list(LIPSCHITZ_STEPS)} per axis"
    )


def _normalization_check(spec: MediumSpec) -> CheckResult:
    potential = spec.potential
    if not potential.is_density:
        return CheckResult(
            "density_normalization",
            margin=1.0,
            passed=False,
            detail=f"potential '{potential.name}' is not a probability density",
        )
    points = 201 if spec.dim <= 2 else 61
    error = potential.normalization_error(potential.truncation_half_width(), points)
    return _result(
        "density_normalization",
        error - NORMALIZATION_TOLERANCE,
        0.0,
        f"|integral - 1| = {error:.3e} over half width "
        f"{potential.truncation_half_width():.3g}",
    )


def validate_assumptions(
    spec: MediumSpec,
    grid: int = 32,
    y_points: int = 5,
    y_extent: float = 3.0,
    tolerance: float = DEFAULT_TOLERANCE,
) -> ValidationReport:
    """Report worst-case violations of the structural assumptions.

    Checks: control sandwich (both sides), antisymmetry of H, control of H
    and of the y-derivatives of a and H by Mã, boundedness by Λ, the
    Lipschitz-in-y bound on σ, and normalization of e^{-2V}.

    Args:
        spec: Medium to validate
        grid: Torus sampling points per axis (≥ 8)
        y_points: Slow-variable sampling points per axis
        y_extent: Half width of the sampled y box
        tolerance: Largest margin counted as a pass

    Returns:
        ValidationReport; never raises for a failing assumption

    Raises:
        ValidationError: If grid < 8
    """
    if grid < 8:
        raise ValidationError(f"validation grid needs >= 8 points per axis ({grid})")

    x, y = sample_grid(spec.dim, grid, y_points, y_extent)
    checks = _control_checks(spec, x, y, tolerance)
    checks.append(_boundedness_check(spec, x, y, tolerance))
    checks.append(_lipschitz_check(spec, x, y, tolerance))
    checks.append(_normalization_check(spec))

    report = ValidationReport(preset_id=spec.preset_id, checks=checks)
    for check in checks:
        if not check.passed:
            report.warnings.append(f"{check.check_name} failed: {check.detail}")
    logger.info(
        f"Validated '{spec.preset_id}' on {x.shape[0]} points: "
        f"{'pass' if report.passed else 'FAIL'}"
    )
    return report


def check_microscopic_ergodicity(
    spec: MediumSpec, basis_cutoff: int
) -> ErgodicityReport:
    """Dimension of the numerical kernel of S̃ on |k|_∞ ≤ basis_cutoff.

    The constant mode is included, so an ergodic reference operator has a
    one-dimensional kernel. Singular values below 1e-8 × the largest count
    as null.

    Raises:
        ValidationError: If basis_cutoff < 1
    """
    if basis_cutoff < 1:
        raise ValidationError(f"basis_cutoff must be >= 1 (got {basis_cutoff})")

    basis = GalerkinBasis(spec.dim, basis_cutoff, include_constant=True)
    a_tilde = coefficients_batch(
        spec, basis.nodes, np.zeros_like(basis.nodes)
    ).a_tilde
    operator = 0.5 * basis.stiffness(a_tilde)
    singular = scipy.linalg.svdvals(operator)
    largest = float(singular.max())
    if largest == 0.0:
        null_dim = basis.size
    else:
        null_dim = int(np.sum(singular < NULL_SPACE_THRESHOLD * largest))

    warnings = []
    if basis_cutoff < spec.preset.mode_cutoff + 2:
        warnings.append(
            f"cutoff {basis_cutoff} does not resolve the reference field "
            f"(modes up to {spec.preset.mode_cutoff})"
        )
    tail = basis.aliasing_tail(a_tilde.reshape(basis.node_count, -1))
    if tail > ALIASING_TOLERANCE:
        warnings.append(f"reference field aliases on the quadrature grid ({tail:.2e})")
    if null_dim != 1:
        warnings.append(
            f"finite-cutoff kernel of dimension {null_dim} at cutoff {basis_cutoff}: "
            "non-constant invariant modes present"
        )
        logger.warning(warnings[-1])

    return ErgodicityReport(
        ergodic=null_dim == 1,
        null_dim=null_dim,
        cutoff=basis_cutoff,
        warnings=warnings,
    )

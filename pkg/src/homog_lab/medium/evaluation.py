"""Pointwise evaluation of coefficient fields and drifts.

`eval_coeffs` and `eval_drifts` are the public entry points: they validate
their inputs, reduce x modulo 2π and return either a single-point or a
batched sample. The `*_batch` variants skip validation and are used on hot
paths (quadrature, simulation steps).
"""

from typing import Any

import numpy as np
import numpy.typing as npt

from homog_lab.medium.models import CoefficientSample, DriftSample, MediumSpec
from homog_lab.utils.validators import validate_points

FloatArray = npt.NDArray[np.float64]

TWO_PI = 2.0 * np.pi


def reduce_fast(x: FloatArray) -> FloatArray:
    """Map fast coordinates onto the fundamental cell [0, 2π)^d."""
    reduced: FloatArray = np.mod(x, TWO_PI)
    return reduced


def sample_grid(
    dim: int, x_points: int, y_points: int, y_extent: float
) -> tuple[FloatArray, FloatArray]:
    """Paired (x, y) arrays covering a torus grid times a centred y box.

    Returns:
        Tuple (x, y), each of shape (x_points^d · y_points^d, d)
    """
    x_axis = np.arange(x_points) * (TWO_PI / x_points)
    y_axis = np.linspace(-y_extent, y_extent, y_points)
    x_cells = _product(x_axis, dim)
    y_cells = _product(y_axis, dim)
    x = np.repeat(x_cells, y_cells.shape[0], axis=0)
    y = np.tile(y_cells, (x_cells.shape[0], 1))
    return x, y


def _product(axis: FloatArray, dim: int) -> FloatArray:
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _diffusion_derivative(sigma: FloatArray, d_sigma: FloatArray) -> FloatArray:
    """∂_k(σσ*) = ∂_kσ σ* + σ ∂_kσ*, shape (N, k, i, j)."""
    left = np.einsum("nkil,njl->nkij", d_sigma, sigma)
    return left + np.swapaxes(left, 2, 3)


def coefficients_batch(
    spec: MediumSpec, x: FloatArray, y: FloatArray
) -> CoefficientSample:
    """All coefficient fields at already reduced, validated points."""
    preset = spec.preset
    sigma = preset.sigma(x, y)
    sigma_tilde = preset.sigma_tilde(x)
    return CoefficientSample(
        a=sigma @ np.swapaxes(sigma, 1, 2),
        sigma=sigma,
        sigma_tilde=sigma_tilde,
        a_tilde=sigma_tilde @ np.swapaxes(sigma_tilde, 1, 2),
        h=preset.h(x, y),
        potential=spec.potential.value(y),
        grad_potential=spec.potential.gradient(y),
    )


def drifts_batch(spec: MediumSpec, x: FloatArray, y: FloatArray) -> DriftSample:
    """Drifts b and c at already reduced, validated points.

    b_j = ½ Σ_i ∂_{x_i}(a + H)_{ij}
    c_j = ½ Σ_i ∂_{y_i}(a + H)_{ij} − Σ_i ∂_{y_i}V (a + H)_{ij}
    """
    preset = spec.preset
    sigma = preset.sigma(x, y)
    full = sigma @ np.swapaxes(sigma, 1, 2) + preset.h(x, y)
    dx = _diffusion_derivative(sigma, preset.d_sigma_x(x, y)) + preset.d_h_x(x, y)
    dy = _diffusion_derivative(sigma, preset.d_sigma_y(x, y)) + preset.d_h_y(x, y)
    grad_v = spec.potential.gradient(y)

    b = 0.5 * np.einsum("niij->nj", dx)
    c = 0.5 * np.einsum("niij->nj", dy) - np.einsum("ni,nij->nj", grad_v, full)
    return DriftSample(b=b, c=c)


def eval_coeffs(spec: MediumSpec, x: Any, y: Any) -> CoefficientSample:
    """Evaluate every coefficient field at (x mod 2π, y).

    Args:
        spec: Medium to evaluate
        x: Fast point(s), shape (d,) or (N, d)
        y: Slow point(s), same shape as x

    Returns:
        CoefficientSample; single-point inputs give unbatched arrays

    Raises:
        ValidationError: If any input is non-finite or has the wrong shape

    Example:
        >>> medium = build_medium("sine1d")
        >>> float(eval_coeffs(medium, [np.pi / 2], [0.0]).a[0, 0])
        3.0
    """
    xs, single = validate_points(x, "x", spec.dim)
    ys, _ = validate_points(y, "y", spec.dim)
    xs, ys = np.broadcast_arrays(xs, ys)
    sample = coefficients_batch(spec, reduce_fast(xs), np.array(ys))
    return sample.at(0) if single else sample


def eval_drifts(spec: MediumSpec, x: Any, y: Any) -> DriftSample:
    """Evaluate the drifts b and c at (x mod 2π, y).

    Raises:
        ValidationError: If any input is non-finite or has the wrong shape
        UnsupportedPresetError: If the preset lacks analytic derivatives
    """
    xs, single = validate_points(x, "x", spec.dim)
    ys, _ = validate_points(y, "y", spec.dim)
    xs, ys = np.broadcast_arrays(xs, ys)
    drifts = drifts_batch(spec, reduce_fast(xs), np.array(ys))
    return drifts.at(0) if single else drifts

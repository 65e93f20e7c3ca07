"""Symmetric matrix helpers: PSD square roots, absolute values, spectra.

Square roots go through the eigendecomposition, so rank-deficient
(degenerate) tensors keep their exact kernel: eigenvalues below
1e-12 × λ_max are set to zero before rooting.
"""

import logging
from typing import Any

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-8
NEGATIVE_TOLERANCE = 1e-9
CLIP_RELATIVE = 1e-12


class InvalidTensorError(Exception):
    """Raised when a tensor is not symmetric positive semidefinite."""

    pass


def _as_batch(matrices: Any) -> FloatArray:
    array = np.asarray(matrices, dtype=np.float64)
    if array.ndim != 3 or array.shape[1] != array.shape[2]:
        raise InvalidTensorError(
            f"Expected a batch of square matrices, got {array.shape}"
        )
    if not np.all(np.isfinite(array)):
        raise InvalidTensorError("Tensor contains non-finite entries")
    return array


def _check_psd(batch: FloatArray) -> tuple[FloatArray, FloatArray]:
    """Symmetry and sign checks; returns eigenvalues and eigenvectors."""
    scale = np.maximum(1.0, np.linalg.norm(batch, ord=2, axis=(1, 2)))
    asymmetry = np.abs(batch - np.swapaxes(batch, 1, 2)).max(axis=(1, 2))
    worst = int(np.argmax(asymmetry / scale))
    if asymmetry[worst] > SYMMETRY_TOLERANCE * scale[worst]:
        raise InvalidTensorError(
            f"Tensor is not symmetric (asymmetry {asymmetry[worst]:.3e})"
        )

    symmetric = 0.5 * (batch + np.swapaxes(batch, 1, 2))
    eigenvalues, eigenvectors = np.linalg.eigh(symmetric)
    lowest = eigenvalues[:, 0]
    if np.any(lowest < -NEGATIVE_TOLERANCE * scale):
        index = int(np.argmin(lowest / scale))
        raise InvalidTensorError(
            f"Tensor is indefinite (eigenvalue {lowest[index]:.3e})"
        )
    return eigenvalues, eigenvectors


def sqrt_psd_batch(matrices: Any, check: bool = True) -> FloatArray:
    """Symmetric PSD square roots of a batch of matrices, shape (N, d, d).

    Args:
        matrices: Array (N, d, d) of symmetric PSD matrices
        check: Whether to validate symmetry and sign first

    Raises:
        InvalidTensorError: If a matrix is asymmetric or indefinite beyond
            tolerance
    """
    batch = _as_batch(matrices)
    if check:
        eigenvalues, eigenvectors = _check_psd(batch)
    else:
        eigenvalues, eigenvectors = np.linalg.eigh(
            0.5 * (batch + np.swapaxes(batch, 1, 2))
        )

    top = eigenvalues[:, -1:]
    floor = CLIP_RELATIVE * np.maximum(top, 0.0)
    clipped = np.where(eigenvalues <= floor, 0.0, eigenvalues)
    roots = np.sqrt(np.maximum(clipped, 0.0))
    result = np.einsum("nik,nk,njk->nij", eigenvectors, roots, eigenvectors)
    symmetrized: FloatArray = 0.5 * (result + np.swapaxes(result, 1, 2))
    return symmetrized


def sqrt_psd(matrix: Any) -> FloatArray:
    """Symmetric PSD square root S of a symmetric PSD matrix, S² = matrix.

    Raises:
        InvalidTensorError: If asymmetric beyond 1e-8 or with an eigenvalue
            below -1e-9 (both relative to max(1, ‖matrix‖))

    Example:
        >>> sqrt_psd(np.diag([4.0, 0.0]))
        array([[2., 0.],
               [0., 0.]])
    """
    array = np.asarray(matrix, dtype=np.float64)
    if array.ndim != 2:
        raise InvalidTensorError(f"Expected a square matrix, got shape {array.shape}")
    return sqrt_psd_batch(array[None])[0]


def matrix_abs_batch(matrices: FloatArray) -> FloatArray:
    """|G| = (GG*)^{1/2} for a batch of (not necessarily symmetric) matrices."""
    gram = matrices @ np.swapaxes(matrices, 1, 2)
    return sqrt_psd_batch(gram, check=False)


def min_eigenvalues(matrices: FloatArray) -> FloatArray:
    """Smallest eigenvalue of the symmetric part of each matrix."""
    symmetric = 0.5 * (matrices + np.swapaxes(matrices, 1, 2))
    lowest: FloatArray = np.linalg.eigvalsh(symmetric)[:, 0]
    return lowest


def symmetrize(matrices: FloatArray) -> FloatArray:
    result: FloatArray = 0.5 * (matrices + np.swapaxes(matrices, -1, -2))
    return result


def antisymmetrize(matrices: FloatArray) -> FloatArray:
    result: FloatArray = 0.5 * (matrices - np.swapaxes(matrices, -1, -2))
    return result

"""Real trigonometric Galerkin basis on the d-torus.

Basis functions are cos(k·x) and sin(k·x) for wavevectors k in a half
space (first nonzero component positive) with 0 < |k|_∞ ≤ K, optionally
preceded by the constant. Under the torus average ⟨f⟩ = (2π)^{-d}∫f the
functions are orthogonal with norms ½ (1 for the constant).

Quadrature is the tensor trapezoid rule on N_q points per axis, exact for
trigonometric polynomials of degree below N_q.
"""

import itertools
import logging
from typing import Optional

import numpy as np
import numpy.typing as npt

from homog_lab.utils.validators import ValidationError, validate_positive_integer

FloatArray = npt.NDArray[np.float64]

logger = logging.getLogger(__name__)


def half_space_wavevectors(dim: int, cutoff: int) -> npt.NDArray[np.int64]:
    """Wavevectors with 0 < |k|_∞ ≤ cutoff and first nonzero entry positive."""
    kept = []
    for k in itertools.product(range(-cutoff, cutoff + 1), repeat=dim):
        nonzero = [v for v in k if v != 0]
        if nonzero and nonzero[0] > 0:
            kept.append(k)
    return np.array(kept, dtype=np.int64).reshape(-1, dim)


class GalerkinBasis:
    """Fourier basis with its quadrature rule.

    Attributes:
        dim: Spatial dimension d
        cutoff: K_gal
        include_constant: Whether the constant function is in the basis
        quadrature_points: N_q per axis
        wavevectors: Half-space wavevectors, shape (M, d)
        norms: Torus-average squared norms of the basis functions
        nodes: Quadrature nodes, shape (N_q^d, d)
    """

    def __init__(
        self,
        dim: int,
        cutoff: int,
        include_constant: bool = False,
        quadrature_points: Optional[int] = None,
    ) -> None:
        self.dim = validate_positive_integer(dim, "dim", max_value=3)
        self.cutoff = validate_positive_integer(cutoff, "basis cutoff")
        self.include_constant = include_constant
        minimum = 4 * self.cutoff
        self.quadrature_points = (
            minimum if quadrature_points is None else int(quadrature_points)
        )
        if self.quadrature_points < minimum:
            raise ValidationError(
                f"quadrature_points must be >= 4*cutoff = {minimum} "
                f"(got {self.quadrature_points})"
            )

        self.wavevectors = half_space_wavevectors(self.dim, self.cutoff)
        self._offset = 1 if include_constant else 0
        self.norms = np.full(self.size, 0.5)
        if include_constant:
            self.norms[0] = 1.0

        n_q = self.quadrature_points
        axis = np.arange(n_q) * (2.0 * np.pi / n_q)
        grids = np.meshgrid(*([axis] * self.dim), indexing="ij")
        self.nodes = np.stack([g.ravel() for g in grids], axis=1)
        self.values, self.gradients = self.design(self.nodes)

        logger.debug(
            f"Galerkin basis d={self.dim}, K={self.cutoff}, size={self.size}, "
            f"nodes={self.node_count}"
        )

    @property
    def size(self) -> int:
        return 2 * self.wavevectors.shape[0] + self._offset

    @property
    def node_count(self) -> int:
        return int(self.nodes.shape[0])

    def labels(self) -> list[str]:
        """Human-readable names of the basis functions, in order."""
        names = ["1"] if self.include_constant else []
        for k in self.wavevectors:
            tag = ",".join(str(int(v)) for v in k)
            names.extend([f"cos({tag})", f"sin({tag})"])
        return names

    def design(self, x: FloatArray) -> tuple[FloatArray, FloatArray]:
        """Basis values (N, P) and gradients (N, P, d) at points x."""
        points = np.atleast_2d(np.asarray(x, dtype=np.float64))
        theta = points @ self.wavevectors.T.astype(np.float64)
        cos, sin = np.cos(theta), np.sin(theta)
        k = self.wavevectors.astype(np.float64)

        n = points.shape[0]
        values = np.empty((n, self.size))
        gradients = np.empty((n, self.size, self.dim))
        off = self._offset
        if self.include_constant:
            values[:, 0] = 1.0
            gradients[:, 0, :] = 0.0
        values[:, off::2] = cos
        values[:, off + 1 :: 2] = sin
        gradients[:, off::2, :] = -sin[:, :, None] * k[None, :, :]
        gradients[:, off + 1 :: 2, :] = cos[:, :, None] * k[None, :, :]
        return values, gradients

    def average(self, values: FloatArray) -> FloatArray:
        """Torus average of node values along the first axis."""
        mean: FloatArray = values.mean(axis=0)
        return mean

    def stiffness(self, field: FloatArray) -> FloatArray:
        """Stiff(F)[p, q] = ⟨Dφ_p · F Dφ_q⟩ for a matrix field F at the nodes.

        Args:
            field: Matrix field at the nodes, shape (N_q^d, d, d)

        Returns:
            Array (P, P)
        """
        weighted = np.einsum("xij,xqj->xqi", field, self.gradients)
        left = self.gradients.transpose(1, 0, 2).reshape(self.size, -1)
        right = weighted.transpose(0, 2, 1).reshape(-1, self.size)
        result: FloatArray = (left @ right) / self.node_count
        return result

    def identity_stiffness(self) -> FloatArray:
        """Stiff(Id), diagonal with entries |k|²·norm."""
        squared = np.zeros(self.size)
        off = self._offset
        k2 = np.sum(self.wavevectors.astype(np.float64) ** 2, axis=1)
        squared[off::2] = k2
        squared[off + 1 :: 2] = k2
        return np.diag(squared * self.norms)

    def load(self, vector_field: FloatArray) -> FloatArray:
        """⟨F · Dφ_p⟩ for a vector field F at the nodes, shape (N_q^d, d)."""
        result: FloatArray = (
            np.einsum("xpk,xk->p", self.gradients, vector_field) / self.node_count
        )
        return result

    def project(self, scalar_field: FloatArray) -> FloatArray:
        """Galerkin coefficients of a scalar field sampled at the nodes."""
        pairing = self.values.T @ scalar_field / self.node_count
        result: FloatArray = pairing / self.norms
        return result

    def pairing(self, scalar_field: FloatArray) -> FloatArray:
        """⟨f φ_p⟩ for a scalar field sampled at the nodes."""
        result: FloatArray = self.values.T @ scalar_field / self.node_count
        return result

    def evaluate(self, coefficients: FloatArray, x: FloatArray) -> FloatArray:
        """Σ_p c_p φ_p at points x."""
        values, _ = self.design(x)
        result: FloatArray = values @ coefficients
        return result

    def gradient(
        self, coefficients: FloatArray, x: Optional[FloatArray] = None
    ) -> FloatArray:
        """D(Σ_p c_p φ_p), shape (N, d). Defaults to the quadrature nodes.

        Coefficients may carry trailing axes, giving (N, d, ...).
        """
        gradients = self.gradients if x is None else self.design(x)[1]
        result: FloatArray = np.tensordot(gradients, coefficients, axes=([1], [0]))
        return result

    def l2_norm_squared(self, coefficients: FloatArray) -> float:
        """Torus-average |u|₂² from coefficients."""
        return float(np.sum(self.norms * coefficients**2))

    def aliasing_tail(self, node_values: FloatArray) -> float:
        """Fraction of spectral energy in modes with |m|_∞ > N_q/4.

        A field resolved by the basis lives in |m|_∞ ≤ K_gal = N_q/4; energy
        above that signals that quadrature of products will alias.
        """
        n_q = self.quadrature_points
        shaped = node_values.reshape((n_q,) * self.dim + (-1,))
        spectrum = np.abs(np.fft.fftn(shaped, axes=tuple(range(self.dim)))) ** 2
        frequencies = np.abs(np.fft.fftfreq(n_q) * n_q)
        grids = np.meshgrid(*([frequencies] * self.dim), indexing="ij")
        high = np.max(np.stack(grids), axis=0) > n_q / 4
        total = float(spectrum.sum())
        if total == 0.0:
            return 0.0
        return float(spectrum[high].sum() / total)

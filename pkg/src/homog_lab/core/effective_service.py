"""Effective Service - homogenized tensors on a macro grid.

This module turns extrapolated correctors into the coefficients of the
limit diffusion:

- Ā(y) = M[(I + Du)* a (I + Du)] and H̄(y) = M[(I + Du)* H (I + Du)]
- B̄(y) = ½ e^{2V} ∂_y(e^{−2V}(Ā + H̄)) by finite differences on the grid
- the reference matrix Ã from its variational (least-squares) formula
- the kernel geometry of Ā: a y-independent kernel K, B̄ ⊥ K, and two-sided
  ellipticity bounds on K^⊥

Example:
    >>> basis = GalerkinBasis(dim=2, cutoff=8)
    >>> service = EffectiveService(corrector_service=CorrectorService(basis))
    >>> grid = YGrid(lower=(-3.0, -3.0), upper=(3.0, 3.0), points=(7, 7))
    >>> tensors = service.tabulate(medium, grid, lambdas=[1e-1, 1e-2, 1e-3])
    >>> tensors.kernel_basis.shape
    (2, 1)
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np
import numpy.typing as npt
import scipy.linalg
from scipy import ndimage

from homog_lab.core.corrector_service import CorrectorService
from homog_lab.core.linalg import antisymmetrize, symmetrize
from homog_lab.medium.evaluation import coefficients_batch
from homog_lab.medium.models import CheckResult, MediumSpec
from homog_lab.medium.potentials import Potential
from homog_lab.utils.validators import ValidationError

FloatArray = npt.NDArray[np.float64]

logger = logging.getLogger(__name__)

KERNEL_THRESHOLD = 1e-8
ANGLE_TOLERANCE = 1e-6
ORTHOGONALITY_TOLERANCE = 1e-8
SYMMETRY_TOLERANCE = 1e-10
PSD_TOLERANCE = 1e-9
SANDWICH_SAMPLES = 50


class GeometryViolationError(Exception):
    """Raised when the kernel of Ā changes dimension across the macro grid."""

    pass


@dataclass(frozen=True)
class YGrid:
    """Rectangular macro grid, C-ordered (last axis fastest).

    Attributes:
        lower: Lower corner per axis
        upper: Upper corner per axis
        points: Grid points per axis (≥ 3 for centred differences)
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self) -> None:
        if not len(self.lower) == len(self.upper) == len(self.points):
            raise ValidationError("y_grid lower, upper and points differ in length")
        for lo, hi, n in zip(self.lower, self.upper, self.points):
            if not hi > lo:
                raise ValidationError(f"y_grid needs upper > lower (got {lo}, {hi})")
            if int(n) < 3:
                raise ValidationError(f"y_grid needs >= 3 points per axis (got {n})")

    @classmethod
    def cube(cls, dim: int, extent: float, points: int) -> "YGrid":
        return cls(
            lower=(-float(extent),) * dim,
            upper=(float(extent),) * dim,
            points=(int(points),) * dim,
        )

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(n) for n in self.points)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def steps(self) -> tuple[float, ...]:
        return tuple(
            (hi - lo) / (n - 1)
            for lo, hi, n in zip(self.lower, self.upper, self.points)
        )

    def axes(self) -> list[FloatArray]:
        return [
            np.linspace(lo, hi, int(n))
            for lo, hi, n in zip(self.lower, self.upper, self.points)
        ]

    def nodes(self) -> FloatArray:
        """All grid points, shape (G, d)."""
        meshes = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in meshes], axis=1)

    def boundary_mask(self) -> npt.NDArray[np.bool_]:
        """True where a node sits on the grid boundary."""
        index = np.indices(self.shape).reshape(self.dim, -1)
        upper = np.asarray(self.shape)[:, None] - 1
        mask: npt.NDArray[np.bool_] = np.any((index == 0) | (index == upper), axis=0)
        return mask

    def contains(self, y: FloatArray) -> npt.NDArray[np.bool_]:
        inside: npt.NDArray[np.bool_] = np.all(
            (y >= np.asarray(self.lower)) & (y <= np.asarray(self.upper)), axis=1
        )
        return inside

    def to_json(self) -> dict[str, Any]:
        return {
            "lower": list(self.lower),
            "upper": list(self.upper),
            "points": list(self.points),
            "steps": list(self.steps),
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "YGrid":
        return cls(
            lower=tuple(float(v) for v in data["lower"]),
            upper=tuple(float(v) for v in data["upper"]),
            points=tuple(int(v) for v in data["points"]),
        )


@dataclass
class GeometryReport:
    """Kernel geometry of Ā over the grid.

    Attributes:
        kernel_dim: Dimension of Ker Ā (identical at every node)
        kernel_basis: Orthonormal basis of K as columns, shape (d, r)
        alpha_min: Smallest eigenvalue of Ā on K^⊥ over the grid
        alpha_max: Largest eigenvalue of Ā on K^⊥ over the grid
        worst_angle: Largest principal angle between Ker Ā(y) and Ker Ā(y₀)
        b_orthogonality: max |⟨B̄, k⟩| / |B̄|
        h_kernel_leak: max |H̄k| / |H̄|
        a_asymmetry: max |Ā − Āᵀ|
        a_min_eigenvalue: Smallest eigenvalue of Ā over the grid
        h_symmetry: max |H̄ + H̄ᵀ|
        second_difference: max ‖Δ²Ā‖ / h² over interior nodes
    """

    kernel_dim: int
    kernel_basis: FloatArray
    alpha_min: float
    alpha_max: float
    worst_angle: float
    b_orthogonality: float
    h_kernel_leak: float
    a_asymmetry: float
    a_min_eigenvalue: float
    h_symmetry: float
    second_difference: float
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (
            self.worst_angle <= ANGLE_TOLERANCE
            and self.b_orthogonality <= ORTHOGONALITY_TOLERANCE
            and self.h_kernel_leak <= ORTHOGONALITY_TOLERANCE
            and self.a_asymmetry <= SYMMETRY_TOLERANCE
            and self.a_min_eigenvalue >= -PSD_TOLERANCE
            and self.h_symmetry <= SYMMETRY_TOLERANCE
            and (self.kernel_dim == self.kernel_basis.shape[0] or self.alpha_min > 0)
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "kernel_dim": self.kernel_dim,
            "kernel_basis": self.kernel_basis.T.tolist(),
            "ellipticity": {"alpha_min": self.alpha_min, "alpha_max": self.alpha_max},
            "worst_principal_angle": self.worst_angle,
            "b_orthogonality": self.b_orthogonality,
            "h_kernel_leak": self.h_kernel_leak,
            "a_asymmetry": self.a_asymmetry,
            "a_min_eigenvalue": self.a_min_eigenvalue,
            "h_symmetry": self.h_symmetry,
            "second_difference": self.second_difference,
            "pass": self.passed,
            "warnings": list(self.warnings),
        }


@dataclass
class EffectiveTensors:
    """Ā, H̄, B̄ tabulated on a macro grid. Treated as immutable.

    Attributes:
        y_grid: Macro grid
        a_bar: Symmetric PSD tensors, shape (G, d, d)
        h_bar: Antisymmetric tensors, shape (G, d, d)
        b_bar: Drift vectors, shape (G, d)
        boundary: Nodes whose B̄ used one-sided differences
        kernel_basis: Orthonormal basis of Ker Ā as columns, shape (d, r)
        ellipticity: (α_min, α_max) of Ā on K^⊥
        metadata: Provenance (preset, config hash, ladder)
    """

    y_grid: YGrid
    a_bar: FloatArray
    h_bar: FloatArray
    b_bar: FloatArray
    boundary: npt.NDArray[np.bool_]
    kernel_basis: FloatArray
    ellipticity: tuple[float, float]
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.y_grid.dim

    def to_json(self) -> dict[str, Any]:
        d = self.dim
        return {
            "y_grid": self.y_grid.to_json(),
            "A_bar": self.a_bar.reshape(-1, d * d).tolist(),
            "H_bar": self.h_bar.reshape(-1, d * d).tolist(),
            "B_bar": self.b_bar.tolist(),
            "boundary": self.boundary.astype(bool).tolist(),
            "kernel_basis": self.kernel_basis.T.tolist(),
            "ellipticity": {
                "alpha_min": self.ellipticity[0],
                "alpha_max": self.ellipticity[1],
            },
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "EffectiveTensors":
        grid = YGrid.from_json(data["y_grid"])
        d = grid.dim
        kernel = np.asarray(data["kernel_basis"], dtype=np.float64).reshape(-1, d)
        return cls(
            y_grid=grid,
            a_bar=np.asarray(data["A_bar"], dtype=np.float64).reshape(-1, d, d),
            h_bar=np.asarray(data["H_bar"], dtype=np.float64).reshape(-1, d, d),
            b_bar=np.asarray(data["B_bar"], dtype=np.float64).reshape(-1, d),
            boundary=np.asarray(data["boundary"], dtype=bool),
            kernel_basis=kernel.T.copy(),
            ellipticity=(
                float(data["ellipticity"]["alpha_min"]),
                float(data["ellipticity"]["alpha_max"]),
            ),
            metadata=dict(data.get("metadata", {})),
        )

    def interpolator(self) -> "TensorInterpolator":
        return TensorInterpolator(self)


class TensorInterpolator:
    """Piecewise-cubic spline interpolation of Ā and B̄ on the grid.

    Spline coefficients are computed once; queries are pure.
    """

    def __init__(self, tensors: EffectiveTensors) -> None:
        grid = tensors.y_grid
        self.grid = grid
        self.dim = grid.dim
        self._lower = np.asarray(grid.lower)
        self._steps = np.asarray(grid.steps)
        shape = grid.shape
        d = self.dim
        a = tensors.a_bar.reshape(shape + (d * d,))
        b = tensors.b_bar.reshape(shape + (d,))
        self._a_coefficients = [self._prefilter(a[..., m]) for m in range(d * d)]
        self._b_coefficients = [self._prefilter(b[..., m]) for m in range(d)]

    @staticmethod
    def _prefilter(values: FloatArray) -> FloatArray:
        filtered: FloatArray = ndimage.spline_filter(
            values, order=3, mode="nearest", output=np.float64
        )
        return filtered

    def _sample(self, coefficients: FloatArray, index: FloatArray) -> FloatArray:
        sampled: FloatArray = ndimage.map_coordinates(
            coefficients, index, order=3, mode="nearest", prefilter=False
        )
        return sampled

    def __call__(
        self, y: FloatArray
    ) -> tuple[FloatArray, FloatArray, npt.NDArray[np.bool_]]:
        """Interpolated (Ā (N, d, d), B̄ (N, d), inside-domain mask (N,))."""
        points = np.atleast_2d(np.asarray(y, dtype=np.float64))
        index = ((points - self._lower) / self._steps).T
        n, d = points.shape[0], self.dim
        a = np.stack([self._sample(c, index) for c in self._a_coefficients], axis=1)
        b = np.stack([self._sample(c, index) for c in self._b_coefficients], axis=1)
        return symmetrize(a.reshape(n, d, d)), b, self.grid.contains(points)


@dataclass
class VariationalResult:
    """Ã from ⟨x, Ãx⟩ = inf_φ M[|σ̃*(Dφ + x)|²].

    Attributes:
        a_tilde: Assembled symmetric matrix, shape (d, d)
        directions: Directions minimized (unit vectors then polarization pairs)
        values: Minimum value per direction
        minimizer_norms: ‖φ‖₁ of the min-norm minimizer per direction
    """

    a_tilde: FloatArray
    directions: list[list[float]]
    values: list[float]
    minimizer_norms: list[float]

    def to_json(self) -> dict[str, Any]:
        return {
            "A_tilde": self.a_tilde.tolist(),
            "directions": self.directions,
            "values": self.values,
            "minimizer_norms": self.minimizer_norms,
        }


def effective_b_bar(
    grid: YGrid, a_bar: FloatArray, h_bar: FloatArray, potential: Potential
) -> tuple[FloatArray, npt.NDArray[np.bool_]]:
    """B̄_i = ½ Σ_j [∂_j(Ā + H̄)_ji − 2 ∂_jV (Ā + H̄)_ji] on the grid.

    Derivatives are second-order differences (centred inside, one-sided on
    the boundary); ∂V is analytic.

    Returns:
        (B̄ of shape (G, d), boundary mask of shape (G,))
    """
    d = grid.dim
    total = (a_bar + h_bar).reshape(grid.shape + (d, d))
    divergence = np.zeros(grid.shape + (d,))
    for j, step in enumerate(grid.steps):
        derivative = np.gradient(total, step, axis=j, edge_order=2)
        divergence += derivative[..., j, :]
    divergence = divergence.reshape(-1, d)

    grad_v = potential.gradient(grid.nodes())
    weighted = np.einsum("nj,nji->ni", grad_v, (a_bar + h_bar))
    b_bar: FloatArray = 0.5 * divergence - weighted
    boundary = grid.boundary_mask()
    logger.debug(f"B_bar on {grid.size} nodes, {int(boundary.sum())} one-sided")
    return b_bar, boundary


def _kernel(matrix: FloatArray) -> tuple[FloatArray, FloatArray]:
    """(kernel basis (d, r), eigenvalues) with threshold 1e-8 × spectral norm."""
    eigenvalues, eigenvectors = np.linalg.eigh(symmetrize(matrix))
    scale = max(abs(float(eigenvalues[-1])), abs(float(eigenvalues[0])))
    null = eigenvalues <= KERNEL_THRESHOLD * scale
    kernel: FloatArray = eigenvectors[:, null]
    return kernel, eigenvalues


def _second_differences(grid: YGrid, a_bar: FloatArray) -> float:
    d = grid.dim
    shaped = a_bar.reshape(grid.shape + (d, d))
    worst = 0.0
    for j, step in enumerate(grid.steps):
        moved = np.moveaxis(shaped, j, 0)
        second = (moved[2:] - 2.0 * moved[1:-1] + moved[:-2]) / step**2
        if second.size:
            worst = max(worst, float(np.abs(second).max()))
    return worst


def _complement_spectrum(
    reference: FloatArray, a_bar: FloatArray
) -> tuple[float, float]:
    """Extreme eigenvalues of Ā restricted to the complement of its kernel."""
    d, r = reference.shape
    if r == d:
        return 0.0, 0.0
    complement = scipy.linalg.null_space(reference.T) if r else np.eye(d)
    restricted = np.einsum("ia,nij,jb->nab", complement, a_bar, complement)
    spectra = np.linalg.eigvalsh(symmetrize(restricted))
    return float(spectra.min()), float(spectra.max())


def _kernel_leaks(
    reference: FloatArray, b_bar: FloatArray, h_bar: FloatArray
) -> tuple[float, float]:
    """Relative components of B̄ and H̄ on the kernel of Ā."""
    if not reference.shape[1]:
        return 0.0, 0.0
    tiny = np.finfo(float).tiny
    b_norms = np.linalg.norm(b_bar, axis=1)
    b_proj = np.abs(b_bar @ reference).max(axis=1)
    h_norms = np.linalg.norm(h_bar, ord=2, axis=(1, 2))
    h_proj = np.linalg.norm(h_bar @ reference, axis=1).max(axis=1)
    return (
        float(np.max(b_proj / np.maximum(b_norms, tiny))),
        float(np.max(h_proj / np.maximum(h_norms, tiny))),
    )


def kernel_and_geometry(tensors: EffectiveTensors) -> GeometryReport:
    """Kernel of Ā, its y-independence, B̄ ⊥ K and ellipticity on K^⊥.

    Raises:
        GeometryViolationError: If the kernel dimension differs between nodes
    """
    grid = tensors.y_grid
    a_bar, h_bar, b_bar = tensors.a_bar, tensors.h_bar, tensors.b_bar
    if a_bar.shape[0] < 2:
        raise ValidationError("kernel geometry needs at least 2 grid points")

    d = grid.dim
    kernels = [_kernel(a)[0] for a in a_bar]
    dims = {k.shape[1] for k in kernels}
    if len(dims) != 1:
        logger.error(f"Kernel dimension varies across the grid: {sorted(dims)}")
        raise GeometryViolationError(
            f"Kernel dimension of A_bar varies across the grid: {sorted(dims)}"
        )

    reference = kernels[0]
    r = reference.shape[1]
    worst_angle = 0.0
    if 0 < r < d:
        for k in kernels[1:]:
            angles = scipy.linalg.subspace_angles(k, reference)
            worst_angle = max(worst_angle, float(np.max(angles)))

    alpha_min, alpha_max = _complement_spectrum(reference, a_bar)
    b_orthogonality, h_leak = _kernel_leaks(reference, b_bar, h_bar)
    report = GeometryReport(
        kernel_dim=r,
        kernel_basis=reference,
        alpha_min=alpha_min,
        alpha_max=alpha_max,
        worst_angle=worst_angle,
        b_orthogonality=b_orthogonality,
        h_kernel_leak=h_leak,
        a_asymmetry=float(np.abs(a_bar - np.swapaxes(a_bar, 1, 2)).max()),
        a_min_eigenvalue=float(np.linalg.eigvalsh(symmetrize(a_bar)).min()),
        h_symmetry=float(np.abs(h_bar + np.swapaxes(h_bar, 1, 2)).max()),
        second_difference=_second_differences(grid, a_bar),
    )
    if worst_angle > ANGLE_TOLERANCE:
        report.warnings.append(f"kernel rotates across the grid ({worst_angle:.2e})")
    if b_orthogonality > ORTHOGONALITY_TOLERANCE:
        report.warnings.append(f"B_bar leaks into the kernel ({b_orthogonality:.2e})")
    if h_leak > ORTHOGONALITY_TOLERANCE:
        report.warnings.append(f"H_bar does not vanish on the kernel ({h_leak:.2e})")
    for warning in report.warnings:
        logger.warning(warning)
    logger.info(
        f"Kernel dim {r}, ellipticity on complement [{alpha_min:.4g}, {alpha_max:.4g}]"
    )
    return report


class EffectiveService:
    """Service computing homogenized tensors from Galerkin correctors.

    Grid nodes are independent; tabulation spreads them over a thread pool
    and reassembles results in node order, so tables never depend on the
    worker count.
    """

    def __init__(self, corrector_service: CorrectorService, threads: int = 1) -> None:
        """Initialize effective service.

        Args:
            corrector_service: Solver for the resolvent problems
            threads: Worker threads for grid tabulation

        Raises:
            ValueError: If corrector_service is None
        """
        if corrector_service is None:
            raise ValueError("corrector_service cannot be None")
        self.corrector_service = corrector_service
        self.threads = max(1, int(threads))

    @property
    def basis(self) -> Any:
        return self.corrector_service.basis

    def effective_tensors_at(
        self, medium: MediumSpec, y: Any, lambdas: list[float]
    ) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
        """Ā and H̄ at one macro point from a single corrector family.

        Returns:
            (Ā, H̄) after symmetrization, followed by the raw averages
        """
        family = self.corrector_service.extrapolate_family(medium, y, lambdas)
        nodes = self.basis.nodes
        ys = np.broadcast_to(np.asarray(y, dtype=np.float64), nodes.shape).copy()
        sample = coefficients_batch(medium, nodes, ys)

        # jacobian[n, k, i] = δ_ki + ∂_k u^i
        jacobian = np.stack([ext.gradient() for ext in family], axis=2)
        jacobian = jacobian + np.eye(medium.dim)
        raw_a = self.basis.average(
            np.einsum("nki,nkl,nlj->nij", jacobian, sample.a, jacobian)
        )
        raw_h = self.basis.average(
            np.einsum("nki,nkl,nlj->nij", jacobian, sample.h, jacobian)
        )
        return symmetrize(raw_a), antisymmetrize(raw_h), raw_a, raw_h

    def effective_a_bar(
        self, medium: MediumSpec, y: Any, lambdas: list[float]
    ) -> FloatArray:
        """Ā(y) = lim M[(I + Du_λ)* a (I + Du_λ)(·, y)], symmetric PSD."""
        return self.effective_tensors_at(medium, y, lambdas)[0]

    def effective_h_bar(
        self, medium: MediumSpec, y: Any, lambdas: list[float]
    ) -> FloatArray:
        """H̄(y) = lim M[(I + Du_λ)* H (I + Du_λ)(·, y)], antisymmetric."""
        if not medium.preset.has_h:
            return np.zeros((medium.dim, medium.dim))
        return self.effective_tensors_at(medium, y, lambdas)[1]

    def variational_a_tilde(self, medium: MediumSpec) -> VariationalResult:
        """Ã by least squares over the Galerkin space, with polarization.

        Rank-deficient problems (gauge directions) use the minimum-norm
        solution.
        """
        basis = self.basis
        d = medium.dim
        sigma_tilde = medium.preset.sigma_tilde(basis.nodes)
        scale = 1.0 / np.sqrt(basis.node_count)
        # rows (node, component) of σ̃*Dφ_p
        design = np.einsum("nki,npk->nip", sigma_tilde, basis.gradients)
        design = design.reshape(-1, basis.size) * scale

        def minimize(x: FloatArray) -> tuple[float, float]:
            target = np.einsum("nki,k->ni", sigma_tilde, x).reshape(-1) * scale
            coefficients, _, _, _ = scipy.linalg.lstsq(design, -target)
            fitted = design @ coefficients
            value = float(np.sum((fitted + target) ** 2))
            return value, float(np.sqrt(0.5 * np.sum(fitted**2)))

        identity = np.eye(d)
        directions: list[list[float]] = []
        values: list[float] = []
        norms: list[float] = []
        a_tilde = np.zeros((d, d))
        for i in range(d):
            value, norm = minimize(identity[i])
            a_tilde[i, i] = value
            directions.append(identity[i].tolist())
            values.append(value)
            norms.append(norm)
        for i in range(d):
            for j in range(i + 1, d):
                plus, plus_norm = minimize(identity[i] + identity[j])
                minus, minus_norm = minimize(identity[i] - identity[j])
                a_tilde[i, j] = a_tilde[j, i] = 0.25 * (plus - minus)
                directions.append((identity[i] + identity[j]).tolist())
                directions.append((identity[i] - identity[j]).tolist())
                values.extend([plus, minus])
                norms.extend([plus_norm, minus_norm])

        logger.info(f"Variational A_tilde for '{medium.preset_id}': {a_tilde.tolist()}")
        return VariationalResult(
            a_tilde=a_tilde, directions=directions, values=values, minimizer_norms=norms
        )

    def sandwich_check(
        self,
        medium: MediumSpec,
        tensors: EffectiveTensors,
        a_tilde: FloatArray,
        samples: int = SANDWICH_SAMPLES,
        seed: int = 0,
        tolerance: float = 1e-6,
    ) -> CheckResult:
        """M⁻¹⟨x, Ãx⟩ ≤ ⟨x, Ā(y)x⟩ ≤ 2C²M⟨x, Ãx⟩ on random x and every node.

        C is 1 without an antisymmetric part and 1 + M² otherwise.
        """
        m = medium.control_constant
        c = 1.0 + m**2 if medium.preset.has_h else 1.0
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((samples, medium.dim))
        reference = np.einsum("si,ij,sj->s", x, a_tilde, x)
        effective = np.einsum("si,nij,sj->ns", x, tensors.a_bar, x)
        scale = np.maximum(reference, 1.0)
        lower = float(((reference / m - effective) / scale).max())
        upper = float(((effective - 2.0 * c**2 * m * reference) / scale).max())
        margin = max(lower, upper, 0.0)
        return CheckResult(
            check_name="sandwich",
            margin=margin,
            passed=margin <= tolerance,
            detail=(
                f"lower violation {lower:.3e}, upper violation {upper:.3e}, "
                f"M={m:.4g}, C={c:.4g}, {samples} directions"
            ),
        )

    def tabulate(
        self,
        medium: MediumSpec,
        grid: YGrid,
        lambdas: list[float],
        metadata: Optional[dict[str, Any]] = None,
    ) -> EffectiveTensors:
        """Tabulate Ā, H̄ and B̄ on the grid and attach the kernel geometry.

        Raises:
            ValidationError: If the grid dimension differs from the medium's
            GeometryViolationError: If the kernel of Ā varies across the grid
        """
        if grid.dim != medium.dim:
            raise ValidationError(
                f"y_grid dimension {grid.dim} does not match medium dimension "
                f"{medium.dim}"
            )
        nodes = grid.nodes()
        logger.info(
            f"Tabulating effective tensors on {grid.size} nodes "
            f"with {self.threads} thread(s)"
        )

        def work(index: int) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
            return self.effective_tensors_at(medium, nodes[index], lambdas)

        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            results = list(executor.map(work, range(grid.size)))

        a_bar = np.stack([r[0] for r in results])
        h_bar = np.stack([r[1] for r in results])
        raw_a = np.stack([r[2] for r in results])
        raw_h = np.stack([r[3] for r in results])
        b_bar, boundary = effective_b_bar(grid, a_bar, h_bar, medium.potential)
        if boundary.any():
            logger.warning(
                f"{int(boundary.sum())} boundary nodes use one-sided differences"
            )

        info = dict(metadata or {})
        info.update(
            {
                "preset_id": medium.preset_id,
                "lambda_ladder": list(lambdas),
                "raw_a_asymmetry": float(
                    np.abs(raw_a - np.swapaxes(raw_a, 1, 2)).max()
                ),
                "raw_h_symmetry": float(np.abs(raw_h + np.swapaxes(raw_h, 1, 2)).max()),
            }
        )
        tensors = EffectiveTensors(
            y_grid=grid,
            a_bar=a_bar,
            h_bar=h_bar,
            b_bar=b_bar,
            boundary=boundary,
            kernel_basis=np.zeros((medium.dim, 0)),
            ellipticity=(0.0, 0.0),
            metadata=info,
        )
        geometry = kernel_and_geometry(tensors)
        return replace(
            tensors,
            kernel_basis=geometry.kernel_basis,
            ellipticity=(geometry.alpha_min, geometry.alpha_max),
        )

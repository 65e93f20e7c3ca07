"""Analytic coefficient presets.

Every preset supplies σ(x, y), σ̃(x) and H(x, y) together with their exact
first derivatives in x and y. Derived quantities (a = σσ*, its derivatives,
the drifts) are formed generically from these in `homog_lab.medium.evaluation`.

Catalog:
    constant   σ, σ̃, H constant matrices
    null       σ = σ̃ = 0
    sine1d     a(x) = α + β sin x in d = 1, ã = a
    sec4       σ̃ = [[1, 1/c], [c, 1]], σ = (1 + δ sin(x₁ + y₁)/2)·σ̃, H = 0
    separable  a = p(x)q(y)·Id, ã = p(x)·Id, optional H = η·p·q·J

Derivative arrays have shape (N, d, d, d) with entry [n, k, i, j] equal to
∂_k of the (i, j) entry at point n.
"""

import logging
from abc import ABC, abstractmethod
from typing import Any, Callable, Optional

import numpy as np
import numpy.typing as npt
import scipy.linalg

from homog_lab.core.linalg import matrix_abs_batch
from homog_lab.medium.evaluation import sample_grid
from homog_lab.medium.fourier import FourierField
from homog_lab.medium.models import MediumSpec, UnsupportedPresetError
from homog_lab.medium.potentials import build_potential
from homog_lab.utils.validators import ValidationError

FloatArray = npt.NDArray[np.float64]

logger = logging.getLogger(__name__)


class CoefficientPreset(ABC):
    """Analytic family of periodic coefficients.

    Attributes:
        dim: Spatial dimension d
        mode_cutoff: Largest |k|_∞ among the Fourier modes of a, ã and H
        has_h: Whether H is not identically zero
        is_x_independent: Whether no coefficient depends on the fast variable
    """

    dim: int = 1
    mode_cutoff: int = 0
    has_h: bool = False
    is_x_independent: bool = False

    @abstractmethod
    def sigma(self, x: FloatArray, y: FloatArray) -> FloatArray:
        """σ at paired points, shape (N, d, d)."""

    @abstractmethod
    def sigma_tilde(self, x: FloatArray) -> FloatArray:
        """σ̃ at points x, shape (N, d, d)."""

    def h(self, x: FloatArray, y: FloatArray) -> FloatArray:
        """H at paired points, shape (N, d, d). Zero unless overridden."""
        return np.zeros((np.atleast_2d(x).shape[0], self.dim, self.dim))

    def d_sigma_x(self, x: FloatArray, y: FloatArray) -> FloatArray:
        raise UnsupportedPresetError(
            f"{type(self).__name__} has no analytic x-derivatives"
        )

    def d_sigma_y(self, x: FloatArray, y: FloatArray) -> FloatArray:
        raise UnsupportedPresetError(
            f"{type(self).__name__} has no analytic y-derivatives"
        )

    def d_h_x(self, x: FloatArray, y: FloatArray) -> FloatArray:
        if self.has_h:
            raise UnsupportedPresetError(
                f"{type(self).__name__} has no analytic x-derivatives of H"
            )
        return self._zero_derivative(x)

    def d_h_y(self, x: FloatArray, y: FloatArray) -> FloatArray:
        if self.has_h:
            raise UnsupportedPresetError(
                f"{type(self).__name__} has no analytic y-derivatives of H"
            )
        return self._zero_derivative(x)

    def natural_control_constant(self) -> float:
        """Smallest M for which the preset satisfies its control bounds."""
        return 1.0

    def _zero_derivative(self, x: FloatArray) -> FloatArray:
        n = np.atleast_2d(x).shape[0]
        return np.zeros((n, self.dim, self.dim, self.dim))

    def _identity_batch(self, n: int) -> FloatArray:
        return np.broadcast_to(np.eye(self.dim), (n, self.dim, self.dim)).copy()


class ConstantPreset(CoefficientPreset):
    """Constant σ, σ̃ and H. Also serves the null medium (σ = 0)."""

    is_x_independent = True

    def __init__(
        self,
        sigma: FloatArray,
        h: Optional[FloatArray] = None,
        sigma_tilde: Optional[FloatArray] = None,
    ) -> None:
        self._sigma = np.array(sigma, dtype=np.float64)
        self.dim = self._sigma.shape[0]
        self._h = (
            np.zeros((self.dim, self.dim)) if h is None else np.array(h, np.float64)
        )
        self._sigma_tilde = (
            self._sigma.copy()
            if sigma_tilde is None
            else np.array(sigma_tilde, dtype=np.float64)
        )
        for name, matrix in (("h", self._h), ("sigma_tilde", self._sigma_tilde)):
            if matrix.shape != (self.dim, self.dim):
                raise ValidationError(f"{name} must be {self.dim}x{self.dim}")
        self.has_h = bool(np.any(self._h != 0.0))

    def sigma(self, x: FloatArray, y: FloatArray) -> FloatArray:
        return self._broadcast(self._sigma, x)

    def sigma_tilde(self, x: FloatArray) -> FloatArray:
        return self._broadcast(self._sigma_tilde, x)

    def h(self, x: FloatArray, y: FloatArray) -> FloatArray:
        return self._broadcast(self._h, x)

    def d_sigma_x(self, x: FloatArray, y: FloatArray) -> FloatArray:
        return self._zero_derivative(x)

    def d_sigma_y(self, x: FloatArray, y: FloatArray) -> FloatArray:
        return self._zero_derivative(x)

    def d_h_x(self, x: FloatArray, y: FloatArray) -> FloatArray:
        return self._zero_derivative(x)

    def d_h_y(self, x: FloatArray, y: FloatArray) -> FloatArray:
        return self._zero_derivative(x)

    def natural_control_constant(self) -> float:
        a = self._sigma @ self._sigma.T
        a_tilde = self._sigma_tilde @ self._sigma_tilde.T
        if np.linalg.matrix_rank(a_tilde) < self.dim:
            return 1.0
        ratios = scipy.linalg.eigh(a, a_tilde, eigvals_only=True)
        h_abs = matrix_abs_batch(self._h[None])[0]
        h_ratios = scipy.linalg.eigh(h_abs, a_tilde, eigvals_only=True)
        smallest = float(ratios.min())
        candidates = [1.0, float(ratios.max()), float(h_ratios.max())]
        if smallest > 0:
            candidates.append(1.0 / smallest)
        return max(candidates)

    def _broadcast(self, matrix: FloatArray, x: FloatArray) -> FloatArray:
        n = np.atleast_2d(x).shape[0]
        return np.broadcast_to(matrix, (n, self.dim, self.dim)).copy()


class Sine1DPreset(CoefficientPreset):
    """d = 1 medium a(x) = α + β sin x with ã = a (so M = 1)."""

    dim = 1
    mode_cutoff = 1

    def __init__(self, alpha: float = 2.0, beta: float = 1.0) -> None:
        if not alpha > abs(beta):
            raise ValidationError(f"sine1d needs alpha > |beta| (got {alpha}, {beta})")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self._a = FourierField.constant(1, alpha) + FourierField.sine(1, beta, (1,))

    def _root(self, x: FloatArray) -> FloatArray:
        zeros = np.zeros_like(np.atleast_2d(x))
        return np.sqrt(self._a.evaluate(x, zeros))

    def sigma(self, x: FloatArray, y: FloatArray) -> FloatArray:
        return self._root(x).reshape(-1, 1, 1)

    def sigma_tilde(self, x: FloatArray) -> FloatArray:
        return self._root(x).reshape(-1, 1, 1)

    def d_sigma_x(self, x: FloatArray, y: FloatArray) -> FloatArray:
        zeros = np.zeros_like(np.atleast_2d(x))
        derivative = self._a.gradient_x(x, zeros)[:, 0] / (2.0 * self._root(x))
        return derivative.reshape(-1, 1, 1, 1)

    def d_sigma_y(self, x: FloatArray, y: FloatArray) -> FloatArray:
        return self._zero_derivative(x)


class Sec4Preset(CoefficientPreset):
    """Two-dimensional degenerate medium with constant rank-one σ̃.

    σ̃ = [[1, 1/c], [c, 1]] has Ker σ̃* = span{(c, −1)}. The diffusion
    σ = s(x, y)·σ̃ with s = 1 + (δ/2)·sin(x₁ + y₁) keeps the range of σ̃.
    """

    dim = 2
    mode_cutoff = 2

    def __init__(self, c: float = 2.0, delta: float = 0.0) -> None:
        if c == 0:
            raise ValidationError("sec4 needs c != 0")
        if not 0.0 <= delta < 2.0:
            raise ValidationError(f"sec4 needs 0 <= delta < 2 (got {delta})")
        self.c = float(c)
        self.delta = float(delta)
        self._tilde = np.array([[1.0, 1.0 / c], [c, 1.0]])
        self._scale = FourierField.constant(2, 1.0) + FourierField.sine(
            2, delta / 2.0, (1, 0), (1.0, 0.0)
        )
        self.is_x_independent = delta == 0.0

    @property
    def kernel_vector(self) -> FloatArray:
        """Unit vector spanning Ker σ̃*."""
        vector = np.array([self.c, -1.0])
        normalized: FloatArray = vector / np.linalg.norm(vector)
        return normalized

    def sigma(self, x: FloatArray, y: FloatArray) -> FloatArray:
        return self._scale.evaluate(x, y)[:, None, None] * self._tilde

    def sigma_tilde(self, x: FloatArray) -> FloatArray:
        n = np.atleast_2d(x).shape[0]
        return np.broadcast_to(self._tilde, (n, 2, 2)).copy()

    def d_sigma_x(self, x: FloatArray, y: FloatArray) -> FloatArray:
        grad = self._scale.gradient_x(x, y)
        return grad[:, :, None, None] * self._tilde

    def d_sigma_y(self, x: FloatArray, y: FloatArray) -> FloatArray:
        grad = self._scale.gradient_y(x, y)
        return grad[:, :, None, None] * self._tilde

    def natural_control_constant(self) -> float:
        half = self.delta / 2.0
        return max(
            (1.0 + half) ** 2,
            1.0 / (1.0 - half) ** 2,
            half**2,
            self.delta * (1.0 + half),
        )


class SeparablePreset(CoefficientPreset):
    """a(x, y) = p(x)q(y)·Id with p = α + β sin x₁ and q = 1 + γ cos y₁.

    ã = p·Id. In d ≥ 2 an antisymmetric part H = η·p·q·J can be switched
    on, J being the unit rotation generator of the (x₁, x₂) plane.
    """

    mode_cutoff = 1

    def __init__(
        self,
        dim: int = 2,
        alpha: float = 3.0,
        beta: float = 1.0,
        gamma: float = 0.5,
        h_amplitude: float = 0.0,
    ) -> None:
        if not alpha > abs(beta):
            raise ValidationError("separable needs alpha > |beta|")
        if not 0.0 <= gamma < 1.0:
            raise ValidationError("separable needs 0 <= gamma < 1")
        if h_amplitude != 0.0 and dim < 2:
            raise ValidationError("separable H needs dim >= 2")
        self.dim = int(dim)
        self.gamma = float(gamma)
        self.h_amplitude = float(h_amplitude)
        self.has_h = h_amplitude != 0.0
        unit_first = (1,) + (0,) * (self.dim - 1)
        slow_first = (1.0,) + (0.0,) * (self.dim - 1)
        self._p = FourierField.constant(self.dim, alpha) + FourierField.sine(
            self.dim, beta, unit_first
        )
        self._q = FourierField.constant(self.dim, 1.0) + FourierField.cosine(
            self.dim, gamma, (0,) * self.dim, slow_first
        )
        self._rotation = np.zeros((self.dim, self.dim))
        if self.dim >= 2:
            self._rotation[0, 1], self._rotation[1, 0] = 1.0, -1.0

    def sigma(self, x: FloatArray, y: FloatArray) -> FloatArray:
        root = np.sqrt(self._p.evaluate(x, y) * self._q.evaluate(x, y))
        return root[:, None, None] * self._identity_batch(root.shape[0])

    def sigma_tilde(self, x: FloatArray) -> FloatArray:
        zeros = np.zeros_like(np.atleast_2d(x))
        root = np.sqrt(self._p.evaluate(x, zeros))
        return root[:, None, None] * self._identity_batch(root.shape[0])

    def h(self, x: FloatArray, y: FloatArray) -> FloatArray:
        weight = self.h_amplitude * self._p.evaluate(x, y) * self._q.evaluate(x, y)
        return weight[:, None, None] * self._rotation

    def d_sigma_x(self, x: FloatArray, y: FloatArray) -> FloatArray:
        p, q = self._p.evaluate(x, y), self._q.evaluate(x, y)
        scalar = self._p.gradient_x(x, y) * (np.sqrt(q) / (2.0 * np.sqrt(p)))[:, None]
        return scalar[:, :, None, None] * np.eye(self.dim)

    def d_sigma_y(self, x: FloatArray, y: FloatArray) -> FloatArray:
        p, q = self._p.evaluate(x, y), self._q.evaluate(x, y)
        scalar = self._q.gradient_y(x, y) * (np.sqrt(p) / (2.0 * np.sqrt(q)))[:, None]
        return scalar[:, :, None, None] * np.eye(self.dim)

    def d_h_x(self, x: FloatArray, y: FloatArray) -> FloatArray:
        scalar = self._p.gradient_x(x, y) * self._q.evaluate(x, y)[:, None]
        return self.h_amplitude * scalar[:, :, None, None] * self._rotation

    def d_h_y(self, x: FloatArray, y: FloatArray) -> FloatArray:
        scalar = self._q.gradient_y(x, y) * self._p.evaluate(x, y)[:, None]
        return self.h_amplitude * scalar[:, :, None, None] * self._rotation

    def natural_control_constant(self) -> float:
        g = self.gamma
        return max(
            1.0 + g,
            1.0 / (1.0 - g),
            g**2 / (4.0 * (1.0 - g)),
            abs(self.h_amplitude) * (1.0 + g),
        )


def _matrix(value: Any, dim: int, name: str) -> FloatArray:
    matrix = np.array(value, dtype=np.float64)
    if matrix.shape != (dim, dim):
        raise ValidationError(f"{name} must be a {dim}x{dim} matrix")
    return matrix


def _constant_factory(params: dict[str, Any]) -> CoefficientPreset:
    dim = int(params.get("dim", 2))
    sigma = _matrix(params.get("sigma", np.eye(dim).tolist()), dim, "sigma")
    h = _matrix(params["h"], dim, "h") if "h" in params else None
    tilde = (
        _matrix(params["sigma_tilde"], dim, "sigma_tilde")
        if "sigma_tilde" in params
        else None
    )
    return ConstantPreset(sigma, h=h, sigma_tilde=tilde)


def _null_factory(params: dict[str, Any]) -> CoefficientPreset:
    dim = int(params.get("dim", 1))
    zeros = np.zeros((dim, dim))
    return ConstantPreset(zeros, sigma_tilde=zeros)


PresetFactory = Callable[[dict[str, Any]], CoefficientPreset]

PRESET_CATALOG: dict[str, tuple[PresetFactory, frozenset[str]]] = {
    "constant": (_constant_factory, frozenset({"dim", "sigma", "h", "sigma_tilde"})),
    "null": (_null_factory, frozenset({"dim"})),
    "sine1d": (lambda p: Sine1DPreset(**p), frozenset({"alpha", "beta"})),
    "sec4": (lambda p: Sec4Preset(**p), frozenset({"c", "delta"})),
    "separable": (
        lambda p: SeparablePreset(**p),
        frozenset({"dim", "alpha", "beta", "gamma", "h_amplitude"}),
    ),
}


def build_preset(
    preset_id: str, parameters: Optional[dict[str, Any]] = None
) -> CoefficientPreset:
    """Instantiate a preset from the catalog.

    Raises:
        UnsupportedPresetError: If the preset name is unknown
        ValidationError: If a parameter is unknown or out of range
    """
    if preset_id not in PRESET_CATALOG:
        raise UnsupportedPresetError(
            f"Unknown preset '{preset_id}'. Available: {sorted(PRESET_CATALOG)}"
        )
    factory, allowed = PRESET_CATALOG[preset_id]
    params = dict(parameters or {})
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ValidationError(f"Unknown parameters for preset '{preset_id}': {unknown}")
    return factory(params)


def estimate_regularity_constant(preset: CoefficientPreset, points: int = 9) -> float:
    """Bound on fields and first derivatives sampled over a coarse grid."""
    x, y = sample_grid(preset.dim, points, points, 3.0)
    norms = [
        np.abs(preset.sigma(x, y)).max(),
        np.abs(preset.sigma_tilde(x)).max(),
        np.abs(preset.h(x, y)).max(),
        np.abs(preset.d_sigma_x(x, y)).max(),
        np.abs(preset.d_sigma_y(x, y)).max(),
        np.abs(preset.d_h_x(x, y)).max(),
        np.abs(preset.d_h_y(x, y)).max(),
    ]
    return float(1.5 * max(1.0, *norms))


def build_medium(
    preset_id: str,
    parameters: Optional[dict[str, Any]] = None,
    potential: str = "gaussian",
    variance: float = 0.5,
    control_constant: Optional[float] = None,
    regularity_constant: Optional[float] = None,
) -> MediumSpec:
    """Build an immutable MediumSpec from catalog names.

    Args:
        preset_id: Preset name from PRESET_CATALOG
        parameters: Preset parameters
        potential: Potential name ('gaussian' or 'flat')
        variance: Gaussian variance per coordinate
        control_constant: M; defaults to the preset's smallest admissible M
        regularity_constant: Λ; defaults to a sampled bound

    Returns:
        MediumSpec ready for evaluation

    Example:
        >>> medium = build_medium("sec4", {"c": 2.0})
        >>> medium.dim
        2
    """
    preset = build_preset(preset_id, parameters)
    control = (
        preset.natural_control_constant()
        if control_constant is None
        else control_constant
    )
    regularity = (
        estimate_regularity_constant(preset)
        if regularity_constant is None
        else regularity_constant
    )
    logger.info(
        f"Built medium '{preset_id}' (d={preset.dim}, M={control:.4g}, "
        f"Lambda={regularity:.4g}, potential={potential})"
    )
    return MediumSpec(
        dim=preset.dim,
        preset=preset,
        potential=build_potential(potential, preset.dim, variance),
        control_constant=float(control),
        regularity_constant=float(regularity),
        preset_id=preset_id,
        parameters=dict(parameters or {}),
    )

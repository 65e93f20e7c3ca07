"""Slow potentials V(y) whose Gibbs weight e^{-2V} is the invariant density.

Two shipped potentials:
- GaussianPotential: e^{-2V} is the centred normal density with covariance
  v·Id (v = 1/2 gives π^{-d/2} e^{-|y|²}, so ∂V = y)
- FlatPotential: V = 0, not normalizable, for drift-free test boxes
"""

import logging
from abc import ABC, abstractmethod
from typing import Any

import numpy as np
import numpy.typing as npt
from scipy.integrate import trapezoid

from homog_lab.medium.models import UnsupportedPresetError

FloatArray = npt.NDArray[np.float64]

logger = logging.getLogger(__name__)


class Potential(ABC):
    """Smooth potential V on R^d with analytic gradient."""

    name: str = "abstract"

    def __init__(self, dim: int) -> None:
        self.dim = dim

    @property
    def is_density(self) -> bool:
        """Whether e^{-2V} is a probability density."""
        return False

    @abstractmethod
    def value(self, y: FloatArray) -> FloatArray:
        """V at points y of shape (N, d)."""

    @abstractmethod
    def gradient(self, y: FloatArray) -> FloatArray:
        """∂V at points y of shape (N, d)."""

    def sample(self, count: int, rng: np.random.Generator) -> FloatArray:
        """Draw i.i.d. samples from e^{-2V(x)}dx.

        Raises:
            UnsupportedPresetError: If the potential has no exact sampler
        """
        raise UnsupportedPresetError(
            f"Potential '{self.name}' has no exact sampler; "
            "use a point-mass initial condition"
        )

    def moments(self) -> tuple[FloatArray, FloatArray]:
        """Per-coordinate first and second moments of e^{-2V}.

        Raises:
            UnsupportedPresetError: If the density has no closed-form moments
        """
        raise UnsupportedPresetError(f"Potential '{self.name}' has no moments")

    def normalization_error(self, half_width: float, points_per_axis: int) -> float:
        """|∫ e^{-2V} − 1| over the box [-half_width, half_width]^d."""
        axis = np.linspace(-half_width, half_width, points_per_axis)
        grids = np.meshgrid(*([axis] * self.dim), indexing="ij")
        points = np.stack([g.ravel() for g in grids], axis=1)
        weight = np.exp(-2.0 * self.value(points)).reshape(
            (points_per_axis,) * self.dim
        )
        integral = weight
        for _ in range(self.dim):
            integral = trapezoid(integral, axis, axis=0)
        return float(abs(float(integral) - 1.0))

    def truncation_half_width(self) -> float:
        return 8.0

    def describe(self) -> dict[str, Any]:
        return {"kind": self.name}


class GaussianPotential(Potential):
    """V(y) = |y|²/(4v) + (d/4)·log(2πv), so that e^{-2V} = N(0, v·Id).

    Attributes:
        variance: Per-coordinate variance v of the density
    """

    name = "gaussian"

    def __init__(self, dim: int, variance: float = 0.5) -> None:
        super().__init__(dim)
        if not variance > 0:
            raise UnsupportedPresetError(f"variance must be positive (got {variance})")
        self.variance = float(variance)

    @property
    def is_density(self) -> bool:
        return True

    def value(self, y: FloatArray) -> FloatArray:
        squared = np.sum(np.atleast_2d(y) ** 2, axis=1)
        return squared / (4.0 * self.variance) + 0.25 * self.dim * np.log(
            2.0 * np.pi * self.variance
        )

    def gradient(self, y: FloatArray) -> FloatArray:
        return np.atleast_2d(y) / (2.0 * self.variance)

    def sample(self, count: int, rng: np.random.Generator) -> FloatArray:
        return rng.normal(0.0, np.sqrt(self.variance), size=(count, self.dim))

    def moments(self) -> tuple[FloatArray, FloatArray]:
        return np.zeros(self.dim), np.full(self.dim, self.variance)

    def truncation_half_width(self) -> float:
        return 10.0 * float(np.sqrt(self.variance))

    def describe(self) -> dict[str, Any]:
        return {"kind": self.name, "variance": self.variance}


class FlatPotential(Potential):
    """V = 0. Only meaningful on bounded test boxes."""

    name = "flat"

    def value(self, y: FloatArray) -> FloatArray:
        return np.zeros(np.atleast_2d(y).shape[0])

    def gradient(self, y: FloatArray) -> FloatArray:
        return np.zeros_like(np.atleast_2d(y), dtype=np.float64)


def build_potential(kind: str, dim: int, variance: float = 0.5) -> Potential:
    """Build a potential from its catalog name.

    Raises:
        UnsupportedPresetError: If kind is unknown
    """
    if kind == "gaussian":
        return GaussianPotential(dim, variance)
    if kind == "flat":
        logger.debug("Flat potential selected; density checks will not apply")
        return FlatPotential(dim)
    raise UnsupportedPresetError(f"Unknown potential '{kind}'")

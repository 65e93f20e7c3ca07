"""Data models for the periodic medium.

Typed structures shared by the medium module: the immutable MediumSpec,
batched coefficient and drift samples, and the reports produced by the
assumption checks.
"""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable

import numpy as np
import numpy.typing as npt

if TYPE_CHECKING:
    from homog_lab.medium.potentials import Potential
    from homog_lab.medium.presets import CoefficientPreset

FloatArray = npt.NDArray[np.float64]


class MediumError(Exception):
    """Raised when a medium is inconsistent or cannot be evaluated."""

    pass


class UnsupportedPresetError(MediumError):
    """Raised when a preset, potential or observable lacks a capability."""

    pass


@dataclass(frozen=True)
class MediumSpec:
    """Coefficient family (σ̃, σ, a, H, V) of a periodic medium.

    The medium is immutable; every evaluation is a pure function of the
    evaluation points, so one spec may be shared by any number of workers.

    Attributes:
        dim: Spatial dimension d
        preset: Analytic coefficient family
        potential: Slow potential V with e^{-2V} a probability density
        control_constant: M in M⁻¹ã ⪯ a ⪯ Mã
        regularity_constant: Λ bounding fields and their derivatives
        preset_id: Catalog name of the preset
        parameters: Preset parameters as given in the config
    """

    dim: int
    preset: "CoefficientPreset"
    potential: "Potential"
    control_constant: float
    regularity_constant: float
    preset_id: str
    parameters: dict[str, Any] = field(default_factory=dict)

    @property
    def sigma_tilde(self) -> Callable[[FloatArray], FloatArray]:
        return self.preset.sigma_tilde

    @property
    def sigma(self) -> Callable[[FloatArray, FloatArray], FloatArray]:
        return self.preset.sigma

    def describe(self) -> dict[str, Any]:
        """JSON-friendly description used in output headers."""
        return {
            "preset_id": self.preset_id,
            "dim": self.dim,
            "parameters": self.parameters,
            "potential": self.potential.describe(),
            "control_constant": self.control_constant,
            "regularity_constant": self.regularity_constant,
        }


@dataclass(frozen=True)
class CoefficientSample:
    """All coefficient fields at a batch of (x, y) points.

    Matrix arrays have shape (N, d, d), vectors (N, d), scalars (N,).
    """

    a: FloatArray
    sigma: FloatArray
    sigma_tilde: FloatArray
    a_tilde: FloatArray
    h: FloatArray
    potential: FloatArray
    grad_potential: FloatArray

    def at(self, index: int) -> "CoefficientSample":
        """Single-point view (leading batch axis removed)."""
        return CoefficientSample(
            a=self.a[index],
            sigma=self.sigma[index],
            sigma_tilde=self.sigma_tilde[index],
            a_tilde=self.a_tilde[index],
            h=self.h[index],
            potential=self.potential[index],
            grad_potential=self.grad_potential[index],
        )


@dataclass(frozen=True)
class DriftSample:
    """Drifts b (fast) and c (slow) at a batch of points, shape (N, d)."""

    b: FloatArray
    c: FloatArray

    def at(self, index: int) -> "DriftSample":
        return DriftSample(b=self.b[index], c=self.c[index])


@dataclass
class CheckResult:
    """One assumption check.

    Attributes:
        check_name: Name of the check
        margin: Worst violation found (0 when the check holds everywhere)
        passed: Whether margin is within tolerance
        detail: Free-text context (location of the worst violation)
    """

    check_name: str
    margin: float
    passed: bool
    detail: str = ""

    def to_json(self) -> dict[str, Any]:
        return {
            "check_name": self.check_name,
            "margin": self.margin,
            "pass": self.passed,
            "detail": self.detail,
        }


@dataclass
class ErgodicityReport:
    """Finite-cutoff null-space test of the reference operator S̃.

    Attributes:
        ergodic: True when only constants lie in the numerical kernel
        null_dim: Dimension of the numerical null space
        cutoff: Fourier cutoff used
        warnings: Resolution or degeneracy warnings
    """

    ergodic: bool
    null_dim: int
    cutoff: int
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {
            "ergodic": self.ergodic,
            "null_dim": self.null_dim,
            "cutoff": self.cutoff,
            "warnings": list(self.warnings),
        }


@dataclass
class ValidationReport:
    """Result of validating a medium against its structural assumptions.

    Attributes:
        preset_id: Catalog name of the validated preset
        checks: Individual check results
        ergodicity: Optional ergodicity test result
        warnings: Non-fatal findings
    """

    preset_id: str
    checks: list[CheckResult] = field(default_factory=list)
    ergodicity: ErgodicityReport | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def check(self, name: str) -> CheckResult:
        """Look up a check by name.

        Raises:
            KeyError: If no check with that name exists
        """
        for result in self.checks:
            if result.check_name == name:
                return result
        raise KeyError(name)

    def to_json(self) -> dict[str, Any]:
        return {
            "preset_id": self.preset_id,
            "pass": self.passed,
            "checks": [check.to_json() for check in self.checks],
            "ergodicity": self.ergodicity.to_json() if self.ergodicity else None,
            "warnings": list(self.warnings),
        }

"""Corrector Service for the auxiliary resolvent problems.

Solves λu − L^y u = rhs on the torus by Galerkin discretization of the
weak form

    λ(u, φ)₂ + ½((a + H)Du, Dφ)₂ = (rhs, φ)₂    for every basis φ,

together with its symmetric (H dropped) and vanishing-viscosity
(a → a + n⁻¹Id) variants, and extrapolates λ → 0 along a geometric ladder.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Optional, Union

import numpy as np
import numpy.typing as npt
import scipy.linalg

from homog_lab.core.galerkin import GalerkinBasis
from homog_lab.medium.evaluation import coefficients_batch
from homog_lab.medium.models import MediumSpec
from homog_lab.utils.validators import ValidationError, validate_ladder

FloatArray = npt.NDArray[np.float64]

logger = logging.getLogger(__name__)

DEFAULT_RESIDUAL_TOLERANCE = 1e-10
DEFAULT_ALIASING_TOLERANCE = 1e-6
DEFAULT_DECAY_TOLERANCE = 1e-8
DECAY_ABSOLUTE_FLOOR = 1e-20
MAX_LADDER_RATIO = 0.25


class CorrectorError(Exception):
    """Raised when a corrector problem cannot be solved reliably."""

    pass


class ResolutionError(CorrectorError):
    """Raised when the Galerkin basis does not resolve the medium."""

    pass


class SingularSystemError(CorrectorError):
    """Raised when the assembled linear system cannot be solved."""

    def __init__(self, message: str, lam: float, condition: float) -> None:
        super().__init__(f"{message} (lambda={lam:.3e}, condition={condition:.3e})")
        self.lam = lam
        self.condition = condition


class ExtrapolationError(CorrectorError):
    """Raised when the λ-ladder energies do not decay toward zero."""

    pass


class OperatorKind(str, Enum):
    """Operator in the resolvent problem."""

    L = "L"
    S = "S"
    L_VISCOUS = "L_viscous"
    S_VISCOUS = "S_viscous"

    @property
    def symmetric(self) -> bool:
        return self in (OperatorKind.S, OperatorKind.S_VISCOUS)

    @property
    def viscous(self) -> bool:
        return self in (OperatorKind.L_VISCOUS, OperatorKind.S_VISCOUS)

    def with_viscosity(self) -> "OperatorKind":
        return OperatorKind.S_VISCOUS if self.symmetric else OperatorKind.L_VISCOUS

    def without_viscosity(self) -> "OperatorKind":
        return OperatorKind.S if self.symmetric else OperatorKind.L


@dataclass(frozen=True)
class DriftRhs:
    """Right-hand side b_i, the i-th component of the fast drift."""

    index: int

    @property
    def label(self) -> str:
        return f"b_{self.index + 1}"


@dataclass(frozen=True)
class ModeRhs:
    """Single-mode right-hand side amplitude·cos(k·x) or amplitude·sin(k·x)."""

    wavevector: tuple[int, ...]
    kind: str = "cos"
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("cos", "sin"):
            raise ValidationError(f"mode kind must be 'cos' or 'sin' (got {self.kind})")
        if not any(self.wavevector):
            raise ValidationError("mode right-hand side needs a nonzero wavevector")

    @property
    def label(self) -> str:
        tag = ",".join(str(v) for v in self.wavevector)
        return f"{self.amplitude:g}*{self.kind}({tag})"

    def values(self, x: FloatArray) -> FloatArray:
        theta = x @ np.asarray(self.wavevector, dtype=np.float64)
        wave = np.cos(theta) if self.kind == "cos" else np.sin(theta)
        result: FloatArray = self.amplitude * wave
        return result


Rhs = Union[DriftRhs, ModeRhs]


@dataclass(frozen=True)
class ResolventProblem:
    """One auxiliary problem λu − L^y u = rhs at a frozen macro point y.

    Attributes:
        medium: Medium providing the coefficients
        y: Macro point
        lam: Resolvent parameter λ > 0
        operator_kind: L, S, L_viscous or S_viscous
        rhs: DriftRhs or ModeRhs
        viscosity: n ≥ 1 for the viscous kinds
    """

    medium: MediumSpec
    y: tuple[float, ...]
    lam: float
    operator_kind: OperatorKind = OperatorKind.L
    rhs: Rhs = DriftRhs(0)
    viscosity: Optional[float] = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ValidationError(f"lambda must be positive (got {self.lam})")
        if len(self.y) != self.medium.dim:
            raise ValidationError(f"y must have {self.medium.dim} components")
        if self.operator_kind.viscous:
            if self.viscosity is None or not self.viscosity >= 1:
                raise ValidationError(
                    f"viscous operators need viscosity n >= 1 (got {self.viscosity})"
                )
        dim = self.medium.dim
        if isinstance(self.rhs, DriftRhs) and not 0 <= self.rhs.index < dim:
            raise ValidationError(f"drift index {self.rhs.index} out of range")
        if isinstance(self.rhs, ModeRhs) and len(self.rhs.wavevector) != dim:
            raise ValidationError("mode wavevector dimension mismatch")

    @classmethod
    def at(
        cls,
        medium: MediumSpec,
        y: Any,
        lam: float,
        operator_kind: OperatorKind = OperatorKind.L,
        rhs: Optional[Rhs] = None,
        viscosity: Optional[float] = None,
    ) -> "ResolventProblem":
        """Build a problem from array-like y."""
        point = tuple(float(v) for v in np.atleast_1d(np.asarray(y, dtype=float)))
        return cls(
            medium=medium,
            y=point,
            lam=float(lam),
            operator_kind=operator_kind,
            rhs=rhs if rhs is not None else DriftRhs(0),
            viscosity=viscosity,
        )


@dataclass
class AssembledSystem:
    """Galerkin system of a resolvent problem.

    Attributes:
        matrix: λ·diag(norms) + operator
        rhs: Load vector (rhs, φ_p)₂
        operator: ½Stiff(a + H) (H dropped for S kinds) plus (1/2n)Stiff(Id)
        reference: Stiff(ã), the Gram matrix of ‖·‖₁ up to the factor ½
        masses: Torus-average norms of the basis functions
        aliasing_tail: Spectral tail of the quadrature coefficient field
    """

    matrix: FloatArray
    rhs: FloatArray
    operator: FloatArray
    reference: FloatArray
    masses: FloatArray
    aliasing_tail: float

    def at_lambda(self, lam: float) -> FloatArray:
        matrix: FloatArray = self.operator + lam * np.diag(self.masses)
        return matrix


@dataclass
class CorrectorSolution:
    """Galerkin solution u_λ with its energy functionals.

    Attributes:
        y: Macro point
        lam: Resolvent parameter
        operator_kind: Operator solved
        rhs_kind: Right-hand side label
        coefficients: Galerkin coefficients
        lambda_energy: λ|u|₂²
        h1_energy: ‖u‖₁² = ½(ãDu, Du)₂
        bilinear_energy: B(u, u) of the solved operator
        rhs_pairing: (rhs, u)₂
        residual: Relative weak residual max_p |(Au − f)_p| / max_p |f_p|
    """

    y: tuple[float, ...]
    lam: float
    operator_kind: OperatorKind
    rhs_kind: str
    coefficients: FloatArray
    lambda_energy: float
    h1_energy: float
    bilinear_energy: float
    rhs_pairing: float
    residual: float
    basis: GalerkinBasis = field(repr=False, compare=False)

    @property
    def energy_bound(self) -> float:
        """λ|u|₂² + ‖u‖₁², bounded uniformly in λ."""
        return self.lambda_energy + self.h1_energy

    @property
    def energy_identity_gap(self) -> float:
        """Relative gap in λ|u|₂² + B(u, u) = (rhs, u)₂."""
        lhs = self.lambda_energy + self.bilinear_energy
        scale = max(abs(self.rhs_pairing), np.finfo(float).tiny)
        return abs(lhs - self.rhs_pairing) / scale

    def gradient(self, x: Optional[FloatArray] = None) -> FloatArray:
        """Du at points x (quadrature nodes by default), shape (N, d)."""
        return self.basis.gradient(self.coefficients, x)

    def directional_gradient(
        self, medium: MediumSpec, x: Optional[FloatArray] = None
    ) -> FloatArray:
        """σ̃*Du at points x, shape (N, d)."""
        points = self.basis.nodes if x is None else np.atleast_2d(x)
        return _directional(medium, points, self.gradient(points))

    def to_json(self) -> dict[str, Any]:
        return {
            "y": list(self.y),
            "lambda": self.lam,
            "operator_kind": self.operator_kind.value,
            "rhs_kind": self.rhs_kind,
            "coefficients": self.coefficients.tolist(),
            "energy": {
                "lambda_l2": self.lambda_energy,
                "h1": self.h1_energy,
                "bilinear": self.bilinear_energy,
                "rhs_pairing": self.rhs_pairing,
                "identity_gap": self.energy_identity_gap,
            },
            "residual": self.residual,
        }


@dataclass
class ExtrapolationResult:
    """λ → 0 extrapolation of one corrector.

    Attributes:
        lambdas: Ladder used
        solutions: Solutions along the ladder
        limit_coefficients: Richardson order-1 extrapolation of the last two
        lambda_decay: λ|u_λ|₂² along the ladder
    """

    lambdas: list[float]
    solutions: list[CorrectorSolution]
    limit_coefficients: FloatArray
    lambda_decay: list[float]
    basis: GalerkinBasis = field(repr=False, compare=False)

    def gradient(self, x: Optional[FloatArray] = None) -> FloatArray:
        return self.basis.gradient(self.limit_coefficients, x)

    def directional_gradient(
        self, medium: MediumSpec, x: Optional[FloatArray] = None
    ) -> FloatArray:
        """Limit field ξ̃ = lim σ̃*Du_λ at points x."""
        points = self.basis.nodes if x is None else np.atleast_2d(x)
        return _directional(medium, points, self.gradient(points))


@dataclass
class YDerivativeResult:
    """Central-difference y-derivatives of a corrector along one direction.

    Attributes:
        direction: Axis j of the difference
        step: Difference step h
        first: Coefficients of ∂_{y_j}u_λ
        second: Coefficients of ∂²_{y_j y_j}u_λ
        first_h1_norm: ‖∂_{y_j}u_λ‖₁
        second_h1_norm: ‖∂²_{y_j y_j}u_λ‖₁
        first_lambda_energy: λ|∂_{y_j}u_λ|₂²
        increment_h1_norm: ‖u_λ(·, y + h e_j) − u_λ(·, y)‖₁
    """

    direction: int
    step: float
    first: FloatArray
    second: FloatArray
    first_h1_norm: float
    second_h1_norm: float
    first_lambda_energy: float
    increment_h1_norm: float


@dataclass
class ViscosityConsistency:
    """Decay of the vanishing-viscosity approximations.

    Attributes:
        viscosities: n ladder
        difference_norms: ‖u_λ^{(n)} − u_λ‖₁ per n
        dissipation: n⁻¹|Du_λ^{(n)}|₂² per n
    """

    viscosities: list[float]
    difference_norms: list[float]
    dissipation: list[float]

    def decreasing(self) -> bool:
        """Whether both sequences are monotone non-increasing and drop overall."""
        return _drops(self.difference_norms) and _drops(self.dissipation)

    def to_json(self) -> dict[str, Any]:
        return {
            "viscosities": self.viscosities,
            "difference_norms": self.difference_norms,
            "dissipation": self.dissipation,
            "decreasing": self.decreasing(),
        }


def _drops(values: list[float]) -> bool:
    if all(value == 0.0 for value in values):
        return True
    monotone = all(b <= a for a, b in zip(values, values[1:]))
    return monotone and values[-1] < values[0]


def _directional(
    medium: MediumSpec, points: FloatArray, gradient: FloatArray
) -> FloatArray:
    tilde = medium.preset.sigma_tilde(np.mod(points, 2.0 * np.pi))
    result: FloatArray = np.einsum("nji,nj->ni", tilde, gradient)
    return result


class CorrectorService:
    """Service solving resolvent problems on a fixed Galerkin basis.

    The service holds no mutable state, so a single instance can serve
    concurrent solves for distinct (y, λ, i).

    Attributes:
        basis: Galerkin basis shared by every solve
        residual_tolerance: Largest accepted relative weak residual
        aliasing_tolerance: Largest accepted spectral tail of the coefficients
        decay_tolerance: Relative slack in the λ|u|₂² monotonicity guard

    Example:
        >>> basis = GalerkinBasis(dim=1, cutoff=16)
        >>> service = CorrectorService(basis)
        >>> problem = ResolventProblem.at(build_medium("sine1d"), [0.0], 1e-2)
        >>> solution = service.solve_resolvent(problem)
    """

    def __init__(
        self,
        basis: GalerkinBasis,
        residual_tolerance: float = DEFAULT_RESIDUAL_TOLERANCE,
        aliasing_tolerance: float = DEFAULT_ALIASING_TOLERANCE,
        decay_tolerance: float = DEFAULT_DECAY_TOLERANCE,
    ) -> None:
        """Initialize the service.

        Raises:
            ValueError: If basis is None
        """
        if basis is None:
            raise ValueError("basis cannot be None")

        self.basis = basis
        self.residual_tolerance = residual_tolerance
        self.aliasing_tolerance = aliasing_tolerance
        self.decay_tolerance = decay_tolerance

    def assemble(self, problem: ResolventProblem) -> AssembledSystem:
        """Assemble the Galerkin matrix and load vector of a problem.

        Raises:
            ResolutionError: If K_gal < K_med + 2 or the coefficient field
                aliases on the quadrature grid
        """
        medium = problem.medium
        if medium.dim != self.basis.dim:
            raise ValidationError(
                f"basis dimension {self.basis.dim} != medium dimension {medium.dim}"
            )
        required = medium.preset.mode_cutoff + 2
        if self.basis.cutoff < required:
            raise ResolutionError(
                f"Basis cutoff {self.basis.cutoff} does not resolve medium modes "
                f"(need >= {required})"
            )

        nodes = self.basis.nodes
        ys = np.broadcast_to(np.asarray(problem.y), nodes.shape).copy()
        sample = coefficients_batch(medium, nodes, ys)
        full = sample.a + sample.h
        tail = self.basis.aliasing_tail(
            np.concatenate([full, sample.a_tilde], axis=1).reshape(nodes.shape[0], -1)
        )
        if tail > self.aliasing_tolerance:
            raise ResolutionError(
                f"Coefficient spectrum tail {tail:.3e} exceeds "
                f"{self.aliasing_tolerance:.1e}; increase the basis cutoff"
            )

        operator = 0.5 * self.basis.stiffness(
            sample.a if problem.operator_kind.symmetric else full
        )
        if problem.operator_kind.viscous:
            assert problem.viscosity is not None
            operator = operator + self.basis.identity_stiffness() / (
                2.0 * problem.viscosity
            )

        rhs = self._load(problem, full)
        system = AssembledSystem(
            matrix=operator + problem.lam * np.diag(self.basis.norms),
            rhs=rhs,
            operator=operator,
            reference=self.basis.stiffness(sample.a_tilde),
            masses=self.basis.norms,
            aliasing_tail=tail,
        )
        logger.debug(
            f"Assembled {problem.operator_kind.value} system size={self.basis.size} "
            f"y={problem.y} lambda={problem.lam:.1e} rhs={problem.rhs.label}"
        )
        return system

    def solve_resolvent(self, problem: ResolventProblem) -> CorrectorSolution:
        """Solve one resolvent problem.

        Raises:
            SingularSystemError: If the solve fails or leaves a large residual
            ResolutionError: If the basis does not resolve the medium
        """
        system = self.assemble(problem)
        coefficients = self._solve(system.matrix, system.rhs, problem.lam)
        return self._package(problem, system, problem.lam, coefficients)

    def solve_symmetric(self, problem: ResolventProblem) -> CorrectorSolution:
        """Solve the symmetric corrector w_λ (H dropped from the operator)."""
        if problem.operator_kind.viscous:
            kind = OperatorKind.S_VISCOUS
        else:
            kind = OperatorKind.S
        return self.solve_resolvent(replace(problem, operator_kind=kind))

    def extrapolate_corrector(
        self, problem: ResolventProblem, lambdas: list[float]
    ) -> ExtrapolationResult:
        """Solve along a decreasing λ ladder and extrapolate to λ = 0.

        Args:
            problem: Template problem; its λ is ignored
            lambdas: Decreasing ladder, at least 3 values, ratio ≤ 1/4

        Raises:
            ExtrapolationError: If λ|u_λ|₂² fails to decrease along the ladder
        """
        ladder = validate_ladder(
            lambdas, "lambda_ladder", decreasing=True, max_ratio=MAX_LADDER_RATIO
        )
        system = self.assemble(replace(problem, lam=ladder[0]))
        solutions = []
        for lam in ladder:
            coefficients = self._solve(system.at_lambda(lam), system.rhs, lam)
            solutions.append(
                self._package(replace(problem, lam=lam), system, lam, coefficients)
            )
        return self._extrapolate(ladder, solutions)

    def extrapolate_family(
        self,
        medium: MediumSpec,
        y: Any,
        lambdas: list[float],
        operator_kind: OperatorKind = OperatorKind.L,
        viscosity: Optional[float] = None,
    ) -> list[ExtrapolationResult]:
        """Extrapolated correctors for every drift b_1..b_d at one y.

        All d right-hand sides share one assembly and one factorization
        per λ.
        """
        ladder = validate_ladder(
            lambdas, "lambda_ladder", decreasing=True, max_ratio=MAX_LADDER_RATIO
        )
        problems = [
            ResolventProblem.at(
                medium, y, ladder[0], operator_kind, DriftRhs(i), viscosity
            )
            for i in range(medium.dim)
        ]
        system = self.assemble(problems[0])
        loads = self._drift_loads(problems[0])

        per_index: list[list[CorrectorSolution]] = [[] for _ in problems]
        for lam in ladder:
            block = self._solve(system.at_lambda(lam), loads, lam)
            for i, problem in enumerate(problems):
                column_system = replace(system, rhs=loads[:, i])
                per_index[i].append(
                    self._package(
                        replace(problem, lam=lam), column_system, lam, block[:, i]
                    )
                )
        return [self._extrapolate(ladder, sols) for sols in per_index]

    def corrector_y_derivatives(
        self, problem: ResolventProblem, h_step: float
    ) -> list[YDerivativeResult]:
        """Central differences in each y direction of the corrector for problem.

        Symmetric operator kinds give the derivatives of w_λ.

        Raises:
            ValidationError: If h_step lies outside [1e-6, 1e-2]
        """
        if not 1e-6 <= h_step <= 1e-2:
            raise ValidationError(f"h_step must lie in [1e-6, 1e-2] (got {h_step})")

        center_system = self.assemble(problem)
        center = self._solve(center_system.matrix, center_system.rhs, problem.lam)
        results = []
        for j in range(problem.medium.dim):
            shift = np.zeros(problem.medium.dim)
            shift[j] = h_step
            plus = self._coefficients_at(problem, np.asarray(problem.y) + shift)
            minus = self._coefficients_at(problem, np.asarray(problem.y) - shift)
            first = (plus - minus) / (2.0 * h_step)
            second = (plus - 2.0 * center + minus) / h_step**2
            results.append(
                YDerivativeResult(
                    direction=j,
                    step=h_step,
                    first=first,
                    second=second,
                    first_h1_norm=self.h1_norm(center_system, first),
                    second_h1_norm=self.h1_norm(center_system, second),
                    first_lambda_energy=problem.lam
                    * self.basis.l2_norm_squared(first),
                    increment_h1_norm=self.h1_norm(center_system, plus - center),
                )
            )
        return results

    def viscosity_consistency(
        self, problem: ResolventProblem, viscosities: list[float]
    ) -> ViscosityConsistency:
        """Compare u_λ^{(n)} against u_λ along an increasing n ladder."""
        ladder = validate_ladder(viscosities, "viscosity_ladder", decreasing=False)
        base_kind = problem.operator_kind.without_viscosity()
        base = replace(problem, operator_kind=base_kind, viscosity=None)
        base_system = self.assemble(base)
        reference = self._solve(base_system.matrix, base_system.rhs, problem.lam)
        identity = self.basis.identity_stiffness()

        differences, dissipation = [], []
        for n in ladder:
            viscous = replace(
                problem, operator_kind=base_kind.with_viscosity(), viscosity=n
            )
            system = self.assemble(viscous)
            coefficients = self._solve(system.matrix, system.rhs, problem.lam)
            differences.append(self.h1_norm(base_system, coefficients - reference))
            dissipation.append(float(coefficients @ identity @ coefficients) / n)

        logger.info(
            f"Viscosity ladder {ladder}: differences "
            f"{[f'{v:.3e}' for v in differences]}"
        )
        return ViscosityConsistency(
            viscosities=ladder, difference_norms=differences, dissipation=dissipation
        )

    @staticmethod
    def h1_norm(system: AssembledSystem, coefficients: FloatArray) -> float:
        """‖u‖₁ = (½ cᵀ Stiff(ã) c)^{1/2}."""
        value = 0.5 * float(coefficients @ system.reference @ coefficients)
        return float(np.sqrt(max(value, 0.0)))

    def _coefficients_at(
        self, problem: ResolventProblem, y: FloatArray
    ) -> FloatArray:
        shifted = replace(problem, y=tuple(float(v) for v in y))
        system = self.assemble(shifted)
        return self._solve(system.matrix, system.rhs, problem.lam)

    def _load(self, problem: ResolventProblem, full: FloatArray) -> FloatArray:
        if isinstance(problem.rhs, DriftRhs):
            return -0.5 * self.basis.load(full[:, :, problem.rhs.index])
        return self.basis.pairing(problem.rhs.values(self.basis.nodes))

    def _drift_loads(self, problem: ResolventProblem) -> FloatArray:
        """Load vectors of b_1..b_d as columns, shape (P, d)."""
        nodes = self.basis.nodes
        ys = np.broadcast_to(np.asarray(problem.y), nodes.shape).copy()
        sample = coefficients_batch(problem.medium, nodes, ys)
        full = sample.a + sample.h
        columns = [
            -0.5 * self.basis.load(full[:, :, i]) for i in range(problem.medium.dim)
        ]
        return np.stack(columns, axis=1)

    def _solve(self, matrix: FloatArray, rhs: FloatArray, lam: float) -> FloatArray:
        try:
            factors = scipy.linalg.lu_factor(matrix, check_finite=True)
            solution: FloatArray = scipy.linalg.lu_solve(factors, rhs)
        except (np.linalg.LinAlgError, ValueError) as e:
            condition = float(np.linalg.cond(matrix, 1))
            logger.error(f"Linear solve failed at lambda={lam:.3e}: {e}")
            raise SingularSystemError("Linear solve failed", lam, condition) from e

        scale = max(float(np.abs(rhs).max(initial=0.0)), np.finfo(float).tiny)
        residual = float(np.abs(matrix @ solution - rhs).max(initial=0.0)) / scale
        if not np.all(np.isfinite(solution)) or residual > self.residual_tolerance:
            condition = float(np.linalg.cond(matrix, 1))
            logger.error(
                f"Solve residual {residual:.3e} above {self.residual_tolerance:.1e}"
            )
            raise SingularSystemError("Residual above tolerance", lam, condition)
        return solution

    def _package(
        self,
        problem: ResolventProblem,
        system: AssembledSystem,
        lam: float,
        coefficients: FloatArray,
    ) -> CorrectorSolution:
        matrix = system.at_lambda(lam)
        scale = max(float(np.abs(system.rhs).max(initial=0.0)), np.finfo(float).tiny)
        residual = float(np.abs(matrix @ coefficients - system.rhs).max(initial=0.0))
        return CorrectorSolution(
            y=problem.y,
            lam=lam,
            operator_kind=problem.operator_kind,
            rhs_kind=problem.rhs.label,
            coefficients=coefficients,
            lambda_energy=lam * self.basis.l2_norm_squared(coefficients),
            h1_energy=0.5 * float(coefficients @ system.reference @ coefficients),
            bilinear_energy=float(coefficients @ system.operator @ coefficients),
            rhs_pairing=float(system.rhs @ coefficients),
            residual=residual / scale,
            basis=self.basis,
        )

    def _extrapolate(
        self, ladder: list[float], solutions: list[CorrectorSolution]
    ) -> ExtrapolationResult:
        decay = [s.lambda_energy for s in solutions]
        slack = self.decay_tolerance * max(decay) + DECAY_ABSOLUTE_FLOOR
        for previous, current in zip(decay, decay[1:]):
            if current > previous + slack:
                logger.error(f"Non-monotone lambda energies: {decay}")
                raise ExtrapolationError(
                    f"lambda*|u|^2 increased along the ladder {ladder}: {decay}"
                )

        lam_prev, lam_last = ladder[-2], ladder[-1]
        c_prev, c_last = solutions[-2].coefficients, solutions[-1].coefficients
        limit = c_last + (c_last - c_prev) * (lam_last / (lam_prev - lam_last))
        logger.debug(
            f"Extrapolated {solutions[-1].rhs_kind} at y={solutions[-1].y}: "
            f"decay={[f'{v:.2e}' for v in decay]}"
        )
        return ExtrapolationResult(
            lambdas=list(ladder),
            solutions=solutions,
            limit_coefficients=limit,
            lambda_decay=decay,
            basis=self.basis,
        )

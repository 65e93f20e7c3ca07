"""Scenario Service - the two-dimensional degenerate worked example.

Runs the full pipeline on the sec4 medium, σ̃ = [[1, 1/c], [c, 1]] with a
one-dimensional kernel of σ̃*:

1. Validate the structural assumptions (ergodicity findings only warn)
2. Tabulate Ā, H̄, B̄ with U = Id and compare Ā against σ̃σ̃*
3. Cross-check with the variational reference tensor and its minimizer
4. Compare the kernel of Ā with Ker σ̃* and check that b, c and σ* have
   no kernel component on the modulated medium
5. Simulate the limit process from a point and measure confinement
6. Run an ε ladder against the limit on a modulated variant (δ > 0)

With U = Id the multiscale process already equals the limit in law, so
the ε ladder needs a nonconstant modulation to show a trend.

Example:
    >>> from homog_lab.core.scenario import Sec4Scenario, Sec4Settings
    >>> scenario = Sec4Scenario(effective_service, engine)
    >>> summary = scenario.run(Sec4Settings(c=2.0))
    >>> print(summary.passed)
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Optional

import numpy as np
import numpy.typing as npt
import scipy.linalg

from homog_lab.core.diagnostics_service import (
    ConvergenceReport,
    convergence_ladder,
    kernel_confinement,
    trend_check,
)
from homog_lab.core.effective_service import (
    EffectiveService,
    EffectiveTensors,
    GeometryReport,
    YGrid,
    kernel_and_geometry,
)
from homog_lab.core.sde_engine import InitialCondition, SimConfig, SimulationEngine
from homog_lab.medium.assumptions import (
    check_microscopic_ergodicity,
    validate_assumptions,
)
from homog_lab.medium.evaluation import eval_coeffs, eval_drifts
from homog_lab.medium.models import CheckResult, MediumSpec, ValidationReport
from homog_lab.medium.presets import build_medium
from homog_lab.utils.io import config_hash

FloatArray = npt.NDArray[np.float64]

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[str, float], None]

KERNEL_ROUNDING = 1e-12
RANGE_TOLERANCE = 1e-10
RANGE_SAMPLES = 64

STAGES = (
    "validate",
    "effective",
    "variational",
    "geometry",
    "limit",
    "ladder",
)


@dataclass(frozen=True)
class Sec4Settings:
    """Parameters and tolerances of the worked example.

    Attributes:
        c: Off-diagonal parameter of σ̃ (c ≠ 0)
        ladder_delta: Modulation δ of the medium used for the ε ladder
        basis_cutoff: Galerkin cutoff used for the ergodicity check
        lambdas: λ ladder for the corrector extrapolation
        y_extent: Half width of the tabulation grid
        y_points: Grid points per axis
        epsilons: Decreasing ε ladder
        horizon: Simulation horizon T
        base_step: Base time step dt0
        limit_paths: Paths of the confinement run
        ladder_paths: Paths per ε of the ladder (0 skips the ladder)
        save_count: Saved times per path
        seed: Base seed
        tensor_tolerance: Largest accepted |Ā − σ̃σ̃*|
        variational_tolerance: Largest accepted |Ã − σ̃σ̃*| and minimizer norm
        angle_tolerance: Largest accepted angle to Ker σ̃*
        confinement_tolerance: Largest accepted kernel excursion of the limit
    """

    c: float = 2.0
    ladder_delta: float = 1.0
    basis_cutoff: int = 4
    lambdas: tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    y_extent: float = 4.0
    y_points: int = 9
    epsilons: tuple[float, ...] = (0.4, 0.2, 0.1)
    horizon: float = 1.0
    base_step: float = 0.02
    limit_paths: int = 1000
    ladder_paths: int = 10_000
    save_count: int = 10
    seed: int = 0
    tensor_tolerance: float = 1e-8
    variational_tolerance: float = 1e-8
    angle_tolerance: float = 1e-6
    confinement_tolerance: float = 1e-8

    def to_json(self) -> dict[str, Any]:
        data = asdict(self)
        data["lambdas"] = list(self.lambdas)
        data["epsilons"] = list(self.epsilons)
        return data


@dataclass
class Sec4Summary:
    """Outcome of the worked example.

    Attributes:
        settings: Settings the scenario ran with
        config_hash: Hash of the settings
        criteria: One verdict per acceptance criterion, in pipeline order
        warnings: Non-fatal findings (ergodicity, assumption margins)
        validation: Assumption report of the U = Id medium
        geometry: Kernel geometry of the U = Id table
        ladder: ε ladder report, None when skipped
        values: Headline numbers per criterion
    """

    settings: Sec4Settings
    config_hash: str
    criteria: list[CheckResult] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    validation: Optional[ValidationReport] = None
    geometry: Optional[GeometryReport] = None
    ladder: Optional[ConvergenceReport] = None
    values: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(criterion.passed for criterion in self.criteria)

    def criterion(self, name: str) -> CheckResult:
        for criterion in self.criteria:
            if criterion.check_name == name:
                return criterion
        raise KeyError(name)

    def to_json(self) -> dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "pass": self.passed,
            "settings": self.settings.to_json(),
            "criteria": [criterion.to_json() for criterion in self.criteria],
            "warnings": list(self.warnings),
            "values": dict(self.values),
            "validation": self.validation.to_json() if self.validation else None,
            "geometry": self.geometry.to_json() if self.geometry else None,
            "ladder": self.ladder.to_json() if self.ladder else None,
        }


def _bounded(name: str, value: float, tolerance: float, detail: str) -> CheckResult:
    return CheckResult(name, value, value <= tolerance, detail)


class Sec4Scenario:
    """Runs the worked example end to end.

    Attributes:
        effective_service: Tabulates homogenized tensors
        engine: Simulates the limit and multiscale processes
        progress_callback: Optional callback(stage, fraction_done)
    """

    def __init__(
        self,
        effective_service: EffectiveService,
        engine: SimulationEngine,
        progress_callback: Optional[ProgressCallback] = None,
    ) -> None:
        """Initialize the scenario.

        Raises:
            ValueError: If a collaborator is None
        """
        if effective_service is None:
            raise ValueError("effective_service cannot be None")
        if engine is None:
            raise ValueError("engine cannot be None")
        self.effective_service = effective_service
        self.engine = engine
        self.progress_callback = progress_callback

    def _progress(self, stage: str) -> None:
        done = (STAGES.index(stage) + 1) / len(STAGES)
        logger.info(f"sec4 stage '{stage}' done ({done:.0%})")
        if self.progress_callback:
            self.progress_callback(stage, done)

    def run(self, settings: Optional[Sec4Settings] = None) -> Sec4Summary:
        """Run every stage and collect the verdicts.

        Raises:
            ValidationError: If a setting is out of range
            CorrectorError: If a corrector solve fails
            GeometryViolationError: If the kernel of Ā varies over the grid
            SimulationError: If too many paths blow up
        """
        settings = settings or Sec4Settings()
        summary = Sec4Summary(
            settings=settings, config_hash=config_hash(settings.to_json())
        )
        medium = build_medium("sec4", {"c": settings.c, "delta": 0.0})
        preset: Any = medium.preset

        summary.validation = validate_assumptions(medium)
        summary.warnings.extend(summary.validation.warnings)
        ergodicity = check_microscopic_ergodicity(medium, settings.basis_cutoff)
        summary.warnings.extend(ergodicity.warnings)
        summary.values["ergodicity"] = ergodicity.to_json()
        summary.criteria.append(
            CheckResult(
                "assumptions",
                max(c.margin for c in summary.validation.checks),
                summary.validation.passed,
                f"{len(summary.validation.checks)} assumption checks",
            )
        )
        self._progress("validate")

        grid = YGrid.cube(medium.dim, settings.y_extent, settings.y_points)
        tensors = self.effective_service.tabulate(
            medium, grid, list(settings.lambdas), {"config_hash": summary.config_hash}
        )
        target = preset.sigma_tilde(np.zeros((1, 2)))[0]
        target = target @ target.T
        tensor_gap = float(np.abs(tensors.a_bar - target).max())
        summary.values["a_bar"] = tensors.a_bar[grid.size // 2].tolist()
        summary.values["a_reference"] = target.tolist()
        summary.criteria.append(
            _bounded(
                "a_bar_matches_reference",
                tensor_gap,
                settings.tensor_tolerance,
                f"max |A_bar - sigma_tilde sigma_tilde*| = {tensor_gap:.3e} "
                f"over {grid.size} nodes",
            )
        )
        self._progress("effective")

        variational = self.effective_service.variational_a_tilde(medium)
        variational_gap = float(np.abs(variational.a_tilde - target).max())
        minimizer = max(variational.minimizer_norms)
        summary.values["a_tilde"] = variational.a_tilde.tolist()
        summary.criteria.append(
            _bounded(
                "variational_matches_reference",
                variational_gap,
                settings.variational_tolerance,
                f"max |A_tilde - sigma_tilde sigma_tilde*| = {variational_gap:.3e}",
            )
        )
        summary.criteria.append(
            _bounded(
                "variational_minimizer_zero",
                minimizer,
                settings.variational_tolerance,
                f"largest minimizer norm {minimizer:.3e}",
            )
        )
        self._progress("variational")

        summary.geometry = kernel_and_geometry(tensors)
        angle = self._kernel_angle(tensors, preset.kernel_vector)
        summary.values["kernel_vector"] = preset.kernel_vector.tolist()
        summary.values["kernel_angle"] = angle
        summary.criteria.append(
            CheckResult(
                "kernel_matches_reference",
                angle,
                summary.geometry.kernel_dim == 1 and angle <= settings.angle_tolerance,
                f"kernel dim {summary.geometry.kernel_dim}, angle to (c, -1) "
                f"{angle:.3e}",
            )
        )
        summary.criteria.append(
            CheckResult(
                "kernel_geometry",
                summary.geometry.worst_angle,
                summary.geometry.passed,
                f"B_bar orthogonality {summary.geometry.b_orthogonality:.3e}",
            )
        )
        ladder_medium = build_medium(
            "sec4", {"c": settings.c, "delta": settings.ladder_delta}
        )
        leak = range_leak(
            ladder_medium, preset.kernel_vector, settings.y_extent, seed=settings.seed
        )
        summary.values["range_leak"] = leak
        summary.criteria.append(
            _bounded(
                "range_confinement",
                leak,
                RANGE_TOLERANCE,
                f"max kernel component of b, c and sigma* at "
                f"delta={settings.ladder_delta:g}: {leak:.3e}",
            )
        )
        self._progress("geometry")

        x0 = (0.0, 0.0)
        limit_config = SimConfig(
            mode="limit",
            horizon=settings.horizon,
            base_step=settings.base_step,
            paths=settings.limit_paths,
            seed=settings.seed,
            initial=InitialCondition("point", x0),
            save_count=settings.save_count,
        )
        limit = self.engine.simulate_limit(limit_config, tensors, medium.potential)
        residual = kernel_confinement(limit, tensors.kernel_basis, x0)
        summary.values["limit_confinement"] = residual
        summary.values["limit_escaped"] = int(limit.escaped.sum())
        summary.criteria.append(
            _bounded(
                "limit_confinement",
                residual,
                settings.confinement_tolerance,
                f"max |<X_t - x0, k>| = {residual:.3e} over {limit.path_count} paths",
            )
        )
        self._progress("limit")

        if settings.ladder_paths > 0:
            summary.ladder = self._ladder(
                settings, ladder_medium, grid, x0, summary.config_hash
            )
            summary.criteria.extend(summary.ladder.checks)
            summary.criteria.append(kernel_variance_check(summary.ladder))
        else:
            summary.warnings.append("epsilon ladder skipped (ladder_paths = 0)")
        self._progress("ladder")

        logger.info(f"sec4 scenario: {'PASS' if summary.passed else 'FAIL'}")
        return summary

    @staticmethod
    def _kernel_angle(tensors: EffectiveTensors, kernel_vector: FloatArray) -> float:
        if tensors.kernel_basis.shape[1] == 0:
            return math.pi / 2
        angles = scipy.linalg.subspace_angles(
            tensors.kernel_basis, kernel_vector.reshape(-1, 1)
        )
        return float(np.max(angles))

    def _ladder(
        self,
        settings: Sec4Settings,
        medium: MediumSpec,
        grid: YGrid,
        x0: tuple[float, float],
        digest: str,
    ) -> ConvergenceReport:
        tensors = self.effective_service.tabulate(
            medium, grid, list(settings.lambdas), {"config_hash": digest}
        )
        config = SimConfig(
            mode="xeps",
            horizon=settings.horizon,
            base_step=settings.base_step,
            paths=settings.ladder_paths,
            seed=settings.seed,
            initial=InitialCondition("point", x0),
            save_count=settings.save_count,
        )
        report = convergence_ladder(
            self.engine, medium, tensors, list(settings.epsilons), config
        )
        report.metadata["delta"] = settings.ladder_delta
        return report


def kernel_variance_check(report: ConvergenceReport) -> CheckResult:
    """Kernel-direction variance of X^ε_T along the ε ladder.

    Passes when the variance shrinks by more than two standard errors from
    the first to the last ε, or when it stays at rounding level throughout
    (paths never leave x0 + range σ̃).
    """
    variances = [entry.metrics["kernel_variance"] for entry in report.entries]
    worst = max(variances)
    if worst <= KERNEL_ROUNDING:
        return CheckResult(
            "kernel_variance",
            worst,
            True,
            f"at rounding level along the ladder (largest {worst:.3e})",
        )
    first, last = report.entries[0], report.entries[-1]
    return trend_check(
        "kernel_variance",
        (first.metrics["kernel_variance"], first.errors.get("kernel_variance", 0.0)),
        (last.metrics["kernel_variance"], last.errors.get("kernel_variance", 0.0)),
    )


def range_leak(
    medium: MediumSpec,
    kernel_vector: FloatArray,
    y_extent: float,
    samples: int = RANGE_SAMPLES,
    seed: int = 0,
) -> float:
    """Largest |⟨b, k⟩|, |⟨c, k⟩| or |σ*k| over random (x, y) pairs."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 2.0 * np.pi, (samples, medium.dim))
    y = rng.uniform(-y_extent, y_extent, (samples, medium.dim))
    drifts = eval_drifts(medium, x, y)
    sigma = eval_coeffs(medium, x, y).sigma
    leaks = (
        drifts.b @ kernel_vector,
        drifts.c @ kernel_vector,
        np.einsum("nij,i->nj", sigma, kernel_vector),
    )
    return float(max(np.abs(leak).max() for leak in leaks))

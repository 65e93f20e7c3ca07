"""Diagnostics Service - measuring the predictions of homogenization.

Diagnostics compare ensembles and tables against what the theory
predicts, at desk scale:

- weak convergence X^ε → X̄ through the energy distance
- confinement of the limit process to x₀ + K^⊥
- ergodic averaging of oscillating observables
- invariance of e^{−2V}dx
- boundedness and stability of correctors along λ, h and n ladders
- Euler-order consistency of the simulated generator

No rates are asserted: every convergence verdict compares the first and
last ladder entries and requires a separation of more than two combined
standard errors.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional

import numpy as np
import numpy.typing as npt
from scipy.spatial.distance import cdist

from homog_lab.core.corrector_service import (
    CorrectorService,
    DriftRhs,
    OperatorKind,
    ResolventProblem,
)
from homog_lab.core.effective_service import EffectiveTensors
from homog_lab.core.sde_engine import (
    MultiscaleDynamics,
    SimConfig,
    SimulationEngine,
    TrajectoryEnsemble,
)
from homog_lab.medium.evaluation import eval_coeffs, eval_drifts, reduce_fast
from homog_lab.medium.models import CheckResult, MediumSpec
from homog_lab.medium.potentials import Potential
from homog_lab.utils.validators import ValidationError, validate_ladder

FloatArray = npt.NDArray[np.float64]

logger = logging.getLogger(__name__)

PAIR_CAP = 10**6
MIN_ENSEMBLE = 100
TREND_SIGMAS = 2.0
NULL_SIGMAS = 3.0
GROWTH_FACTOR = 2.0
FLATNESS = 0.10
ZERO_FLOOR = 1e-12
STABILITY_FLOOR = 1e-8


@dataclass
class EnergyDistance:
    """Batched U-statistic estimate of 2E|X−Y| − E|X−X′| − E|Y−Y′|.

    Attributes:
        value: Estimate clipped at 0
        raw: Unclipped estimate (used for SE comparisons)
        se: Standard error across batches
        batches: Number of batches
        batch_size: Samples per batch
    """

    value: float
    raw: float
    se: float
    batches: int
    batch_size: int

    def to_json(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "raw": self.raw,
            "se": self.se,
            "batches": self.batches,
            "batch_size": self.batch_size,
        }


@dataclass
class LadderEntry:
    """Metrics at one ladder value, each with an optional standard error."""

    parameter: float
    metrics: dict[str, float] = field(default_factory=dict)
    errors: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {
            "parameter": self.parameter,
            "metrics": dict(self.metrics),
            "errors": dict(self.errors),
        }


@dataclass
class ConvergenceReport:
    """Metrics along a ladder with their pass/fail checks.

    Attributes:
        ladder: Name of the ladder parameter ("epsilon", "time", ...)
        entries: One entry per ladder value, in ladder order
        checks: Verdicts against the configured tolerances
        metadata: Provenance
    """

    ladder: str
    entries: list[LadderEntry] = field(default_factory=list)
    checks: list[CheckResult] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def metric_names(self) -> list[str]:
        names: list[str] = []
        for entry in self.entries:
            names.extend(name for name in entry.metrics if name not in names)
        return names

    def to_json(self) -> dict[str, Any]:
        return {
            "ladder": self.ladder,
            "pass": self.passed,
            "entries": [entry.to_json() for entry in self.entries],
            "checks": [check.to_json() for check in self.checks],
            "metadata": dict(self.metadata),
        }

    def to_rows(self) -> tuple[list[str], list[list[Any]]]:
        """Header and rows (ladder value, metric, value, se) for CSV export."""
        header = [self.ladder, "metric", "value", "se"]
        rows = [
            [entry.parameter, name, value, entry.errors.get(name, "")]
            for entry in self.entries
            for name, value in entry.metrics.items()
        ]
        return header, rows

    def render_table(self) -> str:
        """Plain-text table, one row per ladder entry."""
        names = self.metric_names()
        header = [self.ladder] + names
        lines = ["  ".join(f"{h:>18}" for h in header)]
        for entry in self.entries:
            cells = [f"{entry.parameter:>18.6g}"]
            for name in names:
                value = entry.metrics.get(name)
                error = entry.errors.get(name)
                if value is None:
                    cells.append(f"{'-':>18}")
                elif error is None:
                    cells.append(f"{value:>18.6g}")
                else:
                    cells.append(f"{f'{value:.4g}±{error:.2g}':>18}")
            lines.append("  ".join(cells))
        for check in self.checks:
            status = "PASS" if check.passed else "FAIL"
            lines.append(f"[{status}] {check.check_name}: {check.detail}")
        return "\n".join(lines)


def energy_distance(
    first: Any, second: Any, seed: int = 0, pair_cap: int = PAIR_CAP
) -> EnergyDistance:
    """Energy distance between two samples.

    Both samples are truncated to a common size n and reordered by the same
    seeded permutation. Batches of size m use only off-diagonal pairs, so
    the estimate is exactly symmetric in its arguments and exactly 0 on
    identical inputs. At most pair_cap cross pairs are evaluated.

    Raises:
        ValidationError: If the samples differ in dimension or hold fewer
            than 4 points
    """
    a = np.atleast_2d(np.asarray(first, dtype=np.float64))
    b = np.atleast_2d(np.asarray(second, dtype=np.float64))
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValidationError(f"sample shapes differ: {a.shape} vs {b.shape}")
    n = min(a.shape[0], b.shape[0])
    if n < 4:
        raise ValidationError(f"energy distance needs >= 4 points per sample ({n})")

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    order = rng.permutation(n)
    size = max(2, min(n // 2, pair_cap // n))
    count = n // size
    upper = np.triu_indices(size, 1)

    stats = np.empty(count)
    for k in range(count):
        index = order[k * size : (k + 1) * size]
        block_a, block_b = a[index], b[index]
        cross = cdist(block_a, block_b)
        cross_sum = cross[upper].mean() + cross.T[upper].mean()
        self_sum = cdist(block_a, block_a)[upper].mean() + cdist(
            block_b, block_b
        )[upper].mean()
        stats[k] = cross_sum - self_sum

    raw = float(stats.mean())
    se = float(stats.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
    return EnergyDistance(
        value=max(raw, 0.0), raw=raw, se=se, batches=count, batch_size=size
    )


def weak_distance(
    first: TrajectoryEnsemble, second: TrajectoryEnsemble, seed: int = 0
) -> EnergyDistance:
    """Energy distance between the final-time laws of two ensembles.

    Raises:
        ValidationError: If the horizons differ or an ensemble has fewer than
            100 valid paths
    """
    t_first, t_second = float(first.times[-1]), float(second.times[-1])
    if abs(t_first - t_second) > 1e-12 * max(1.0, abs(t_first)):
        raise ValidationError(
            f"ensembles end at different times: {t_first}, {t_second}"
        )
    a, b = first.final_states(), second.final_states()
    if min(a.shape[0], b.shape[0]) < MIN_ENSEMBLE:
        raise ValidationError(
            f"weak distance needs >= {MIN_ENSEMBLE} valid paths per ensemble "
            f"(got {a.shape[0]}, {b.shape[0]})"
        )
    return energy_distance(a, b, seed=seed)


def split_half(ensemble: TrajectoryEnsemble, seed: int = 0) -> EnergyDistance:
    """Energy distance between the two halves of one ensemble's final states."""
    states = ensemble.final_states()
    half = states.shape[0] // 2
    return energy_distance(states[:half], states[half : 2 * half], seed=seed)


def trend_check(
    name: str,
    first: tuple[float, float],
    last: tuple[float, float],
    sigmas: float = TREND_SIGMAS,
) -> CheckResult:
    """Pass when first − last exceeds `sigmas` combined standard errors.

    A metric that is identically zero at both ends passes trivially.
    """
    (v_first, se_first), (v_last, se_last) = first, last
    if v_first == 0.0 and v_last == 0.0 and se_first == 0.0 and se_last == 0.0:
        return CheckResult(name, 0.0, True, "identically zero along the ladder")
    combined = math.hypot(se_first, se_last)
    separation = v_first - v_last
    return CheckResult(
        check_name=name,
        margin=max(0.0, sigmas * combined - separation),
        passed=separation > sigmas * combined,
        detail=(
            f"first {v_first:.4g}±{se_first:.2g}, last {v_last:.4g}±{se_last:.2g}, "
            f"separation {separation:.3g} vs {sigmas:g}×{combined:.3g}"
        ),
    )


def null_check(
    name: str,
    values: list[tuple[float, float]],
    null: tuple[float, float],
    sigmas: float = NULL_SIGMAS,
) -> CheckResult:
    """Pass when every value lies within `sigmas` combined SEs of the null."""
    null_value, null_se = null
    worst = 0.0
    for value, se in values:
        combined = math.hypot(se, null_se)
        excess = abs(value - null_value) - sigmas * combined
        worst = max(worst, excess)
    return CheckResult(
        check_name=name,
        margin=worst,
        passed=worst <= 0.0,
        detail=f"null {null_value:.4g}±{null_se:.2g}, {len(values)} ladder values",
    )


def kernel_confinement(
    ensemble: TrajectoryEnsemble, kernel_basis: FloatArray, x0: Any
) -> float:
    """max over valid paths and saved times of |⟨X_t − x₀, k⟩|.

    Returns 0 for an empty kernel.
    """
    kernel = np.asarray(kernel_basis, dtype=np.float64)
    if kernel.ndim != 2 or kernel.shape[1] == 0:
        return 0.0
    states = ensemble.states[ensemble.valid]
    if states.size == 0:
        return 0.0
    displacement = states - np.asarray(x0, dtype=np.float64)
    return float(np.abs(displacement @ kernel).max())


def _kernel_variance(states: FloatArray, kernel: FloatArray) -> tuple[float, float]:
    if kernel.shape[1] == 0 or states.shape[0] < 2:
        return 0.0, 0.0
    projected = states @ kernel
    variance = float(projected.var(axis=0, ddof=1).sum())
    return variance, variance * math.sqrt(2.0 / (states.shape[0] - 1))


def convergence_ladder(
    engine: SimulationEngine,
    medium: MediumSpec,
    tensors: EffectiveTensors,
    epsilons: list[float],
    config: SimConfig,
) -> ConvergenceReport:
    """Weak distance between X^ε_T and X̄_T along a decreasing ε ladder.

    The limit ensemble uses the config seed; the ε runs use seed + 1 + index.
    For media without fast-variable dependence, X^ε and X̄ coincide in law
    and the verdict is a split-half null comparison instead of a trend.

    Raises:
        ValidationError: If the ladder is not decreasing with >= 3 values
        SimulationError: Propagated from the engine
    """
    ladder = validate_ladder(epsilons, "epsilon_ladder", decreasing=True)
    limit = engine.simulate_limit(
        replace(config, mode="limit", viscosity=math.inf), tensors, medium.potential
    )
    null = split_half(limit, seed=config.seed)
    kernel = tensors.kernel_basis
    x0 = np.asarray(config.initial.x0) if config.initial.mode == "point" else None

    report = ConvergenceReport(
        ladder="epsilon",
        metadata={
            "preset_id": medium.preset_id,
            "limit_config_hash": limit.metadata["config_hash"],
            "split_half_null": null.to_json(),
            "kernel_dim": int(kernel.shape[1]),
        },
    )
    for index, eps in enumerate(ladder):
        run = replace(
            config,
            mode="xeps",
            epsilon=eps,
            viscosity=math.inf,
            seed=config.seed + 1 + index,
        )
        ensemble = engine.simulate_xeps(run, medium)
        distance = weak_distance(ensemble, limit, seed=config.seed)
        variance, variance_se = _kernel_variance(ensemble.final_states(), kernel)
        entry = LadderEntry(
            parameter=eps,
            metrics={"energy_distance": distance.raw, "kernel_variance": variance},
            errors={"energy_distance": distance.se, "kernel_variance": variance_se},
        )
        if x0 is not None:
            entry.metrics["confinement"] = kernel_confinement(ensemble, kernel, x0)
        entry.metrics["flagged"] = float(ensemble.metadata["flagged"])
        report.entries.append(entry)
        logger.info(
            f"epsilon={eps:g}: energy distance {distance.raw:.4g}±{distance.se:.2g}"
        )

    pairs = [
        (e.metrics["energy_distance"], e.errors["energy_distance"])
        for e in report.entries
    ]
    if medium.preset.is_x_independent:
        report.checks.append(
            null_check("energy_distance_null", pairs, (null.raw, null.se))
        )
    else:
        report.checks.append(trend_check("energy_distance_trend", pairs[0], pairs[-1]))
    if x0 is not None:
        limit_residual = kernel_confinement(limit, kernel, x0)
        report.metadata["limit_confinement"] = limit_residual
        report.checks.append(
            CheckResult(
                "limit_confinement",
                limit_residual,
                limit_residual <= 1e-8,
                f"max |<X_t - x0, k>| = {limit_residual:.3e} for the limit process",
            )
        )
    return report


@dataclass(frozen=True)
class Observable:
    """Oscillating observable Ψ(x, y) with exact torus average Ψ̄(y).

    Catalog:
        sin_x1            Ψ = sin(x₁)·g(y),      Ψ̄ = 0
        two_plus_sin_x1   Ψ = (2 + sin x₁)·g(y), Ψ̄ = 2·g(y)
        y_only            Ψ = cos(y₁)·g(y),      Ψ̄ = Ψ
    with g(y) = exp(−|y|²/2) when weighted, else 1.
    """

    name: str = "sin_x1"
    weighted: bool = False

    def __post_init__(self) -> None:
        if self.name not in OBSERVABLES:
            raise ValidationError(
                f"unknown observable '{self.name}' (choose from {sorted(OBSERVABLES)})"
            )

    def _weight(self, y: FloatArray) -> FloatArray:
        if not self.weighted:
            return np.ones(y.shape[0])
        weight: FloatArray = np.exp(-0.5 * np.sum(y**2, axis=1))
        return weight

    def value(self, x: FloatArray, y: FloatArray) -> FloatArray:
        """Ψ at fast points x (already reduced) and slow points y."""
        psi, _ = OBSERVABLES[self.name]
        result: FloatArray = psi(x, y) * self._weight(y)
        return result

    def average(self, y: FloatArray) -> FloatArray:
        _, psi_bar = OBSERVABLES[self.name]
        result: FloatArray = psi_bar(y) * self._weight(y)
        return result

    def oscillation(self, epsilon: float) -> Callable[[FloatArray], FloatArray]:
        """Path functional X ↦ Ψ(X/ε, X) − Ψ̄(X)."""

        def functional(states: FloatArray) -> FloatArray:
            difference: FloatArray = self.value(
                reduce_fast(states / epsilon), states
            ) - self.average(states)
            return difference

        return functional


def _y_only(x: FloatArray, y: FloatArray) -> FloatArray:
    result: FloatArray = np.cos(y[:, 0])
    return result


OBSERVABLES: dict[
    str,
    tuple[
        Callable[[FloatArray, FloatArray], FloatArray],
        Callable[[FloatArray], FloatArray],
    ],
] = {
    "sin_x1": (lambda x, y: np.sin(x[:, 0]), lambda y: np.zeros(y.shape[0])),
    "two_plus_sin_x1": (
        lambda x, y: 2.0 + np.sin(x[:, 0]),
        lambda y: np.full(y.shape[0], 2.0),
    ),
    "y_only": (_y_only, lambda y: _y_only(y, y)),
}


def ergodic_average_check(
    engine: SimulationEngine,
    medium: MediumSpec,
    epsilons: list[float],
    observable: Observable,
    config: SimConfig,
) -> ConvergenceReport:
    """E[sup_s |∫₀^s Ψ(X^ε/ε, X^ε) − Ψ̄(X^ε) dr|²] along an ε ladder.

    The time integral is accumulated at every Euler step; the supremum is
    taken over the saved times. The check is quenched: one fixed periodic
    medium, no medium average.
    """
    ladder = validate_ladder(epsilons, "epsilon_ladder", decreasing=True)
    report = ConvergenceReport(
        ladder="epsilon",
        metadata={"preset_id": medium.preset_id, "observable": observable.name},
    )
    for index, eps in enumerate(ladder):
        run = replace(
            config,
            mode="xeps",
            epsilon=eps,
            viscosity=math.inf,
            seed=config.seed + 1 + index,
        )
        ensemble = engine.simulate_xeps(run, medium, observable.oscillation(eps))
        assert ensemble.integrals is not None
        integrals = ensemble.integrals[ensemble.valid]
        squared_sup = np.max(np.abs(integrals), axis=1) ** 2
        count = max(squared_sup.size, 1)
        error = float(squared_sup.mean()) if squared_sup.size else 0.0
        se = (
            float(squared_sup.std(ddof=1) / math.sqrt(count))
            if squared_sup.size > 1
            else 0.0
        )
        report.entries.append(
            LadderEntry(
                parameter=eps, metrics={"sup_error": error}, errors={"sup_error": se}
            )
        )
        logger.info(f"epsilon={eps:g}: ergodic sup-error {error:.4g}±{se:.2g}")

    first, last = report.entries[0], report.entries[-1]
    report.checks.append(
        trend_check(
            "ergodic_average_trend",
            (first.metrics["sup_error"], first.errors["sup_error"]),
            (last.metrics["sup_error"], last.errors["sup_error"]),
        )
    )
    return report


def invariant_measure_check(
    ensemble: TrajectoryEnsemble, potential: Potential, sigmas: float = NULL_SIGMAS
) -> ConvergenceReport:
    """Empirical moments at each saved time against those of e^{−2V}.

    Second moments decide the verdict; first moments are reported.

    Raises:
        ValidationError: If the ensemble did not start from the density
        UnsupportedPresetError: If the potential has no closed-form moments
    """
    if ensemble.metadata.get("initial") != "density":
        raise ValidationError("invariant measure check needs a density initial law")
    mean, second = potential.moments()
    report = ConvergenceReport(
        ladder="time", metadata={"potential": potential.describe()}
    )
    worst = 0.0
    for index, t in enumerate(ensemble.times):
        states = ensemble.states_at(index)
        n = states.shape[0]
        entry = LadderEntry(parameter=float(t))
        for i in range(ensemble.dim):
            coordinate = states[:, i]
            first_moment = float(coordinate.mean())
            second_moment = float(np.mean(coordinate**2))
            first_se = float(coordinate.std(ddof=1) / math.sqrt(n))
            second_se = float((coordinate**2).std(ddof=1) / math.sqrt(n))
            entry.metrics[f"mean_gap_{i + 1}"] = abs(first_moment - float(mean[i]))
            entry.errors[f"mean_gap_{i + 1}"] = first_se
            gap = abs(second_moment - float(second[i]))
            entry.metrics[f"second_gap_{i + 1}"] = gap
            entry.errors[f"second_gap_{i + 1}"] = second_se
            worst = max(worst, gap - sigmas * second_se)
        report.entries.append(entry)

    report.checks.append(
        CheckResult(
            check_name="second_moments",
            margin=max(worst, 0.0),
            passed=worst <= 0.0,
            detail=(
                f"second moments within {sigmas:g} SE "
                f"at {ensemble.times.size} times"
            ),
        )
    )
    return report


@dataclass
class RegularityRow:
    quantity: str
    corrector: str
    lam: float
    step: Optional[float]
    value: float

    def as_list(self) -> list[Any]:
        return [self.quantity, self.corrector, self.lam, self.step, self.value]


@dataclass
class RegularityReport:
    """Ratio table of the corrector regularity suite."""

    rows: list[RegularityRow] = field(default_factory=list)
    checks: list[CheckResult] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def values(self, quantity: str, corrector: str) -> list[float]:
        return [
            r.value
            for r in self.rows
            if r.quantity == quantity and r.corrector == corrector
        ]

    def to_json(self) -> dict[str, Any]:
        return {
            "pass": self.passed,
            "rows": [
                {
                    "quantity": r.quantity,
                    "corrector": r.corrector,
                    "lambda": r.lam,
                    "h": r.step,
                    "value": r.value,
                }
                for r in self.rows
            ],
            "checks": [check.to_json() for check in self.checks],
            "metadata": dict(self.metadata),
        }

    def to_rows(self) -> tuple[list[str], list[list[Any]]]:
        return ["quantity", "corrector", "lambda", "h", "value"], [
            r.as_list() for r in self.rows
        ]


def _flatness(name: str, values: list[float]) -> CheckResult:
    low, high = min(values), max(values)
    spread = 0.0 if high <= ZERO_FLOOR else (high - low) / high
    return CheckResult(
        name,
        spread,
        spread <= FLATNESS,
        f"relative spread {spread:.3%} over the ladder",
    )


def _stability(name: str, values: list[float]) -> CheckResult:
    """Consecutive values may not grow by more than 2×."""
    worst = 0.0
    for previous, current in zip(values, values[1:]):
        if current <= STABILITY_FLOOR:
            continue
        growth = current / max(previous, ZERO_FLOOR)
        worst = max(worst, growth)
    return CheckResult(
        name,
        max(worst - GROWTH_FACTOR, 0.0),
        worst <= GROWTH_FACTOR,
        f"largest growth ratio {worst:.3g} along the refinement",
    )


def _lipschitz_ladder(
    corrector_service: CorrectorService,
    problem: ResolventProblem,
    h_steps: tuple[float, ...],
    report: RegularityReport,
) -> float:
    """Lipschitz rows of u_λ, ∂_y u_λ and w_λ at one λ.

    Returns λ|∂_y u_λ|₂² + ‖∂_y u_λ‖₁² at the finest step.
    """
    lam = problem.lam
    symmetric = replace(problem, operator_kind=OperatorKind.S)
    series: dict[str, list[float]] = {"u": [], "dy_u": [], "w": []}
    energy = 0.0
    for h in h_steps:
        derivatives = corrector_service.corrector_y_derivatives(problem, h)
        w_derivatives = corrector_service.corrector_y_derivatives(symmetric, h)
        ratios = {
            "u": max(r.increment_h1_norm / h for r in derivatives),
            "dy_u": max(r.second_h1_norm for r in derivatives),
            "w": max(r.increment_h1_norm / h for r in w_derivatives),
        }
        for corrector, ratio in ratios.items():
            series[corrector].append(ratio)
            report.rows.append(RegularityRow("lipschitz", corrector, lam, h, ratio))
        energy = max(r.first_lambda_energy + r.first_h1_norm**2 for r in derivatives)

    for corrector, values in series.items():
        name = f"lipschitz_{corrector}_lambda={lam:g}"
        report.checks.append(_stability(name, values))
    return energy


def regularity_suite(
    corrector_service: CorrectorService,
    medium: MediumSpec,
    y: Any,
    lambdas: list[float],
    viscosities: list[float],
    h_steps: tuple[float, ...] = (1e-2, 1e-3),
    rhs_index: int = 0,
) -> RegularityReport:
    """Energy bounds, Lipschitz-in-y ratios and viscosity decay of correctors.

    Tabulates, for g ∈ {u_λ, ∂_y u_λ, w_λ}, the energy λ|g|₂² + ‖g‖₁² along
    the λ ladder and the ratios ‖g(·, y + h) − g(·, y)‖₁/|h| along the h
    ladder, then the viscosity sequences of u_λ^{(n)}.
    """
    ladder = validate_ladder(lambdas, "lambda_ladder", decreasing=True)
    report = RegularityReport(
        metadata={"preset_id": medium.preset_id, "y": list(np.atleast_1d(y))}
    )
    rhs = DriftRhs(rhs_index)
    base = ResolventProblem.at(medium, y, ladder[0], OperatorKind.L, rhs)

    u_energy, w_energy, du_energy, w_gap = [], [], [], 0.0
    for lam in ladder:
        problem = replace(base, lam=lam)
        u = corrector_service.solve_resolvent(problem)
        w = corrector_service.solve_symmetric(problem)
        u_energy.append(u.energy_bound)
        w_energy.append(w.energy_bound)
        w_gap = max(w_gap, float(np.abs(u.coefficients - w.coefficients).max()))
        report.rows.append(RegularityRow("energy", "u", lam, None, u.energy_bound))
        report.rows.append(RegularityRow("energy", "w", lam, None, w.energy_bound))

        energy = _lipschitz_ladder(corrector_service, problem, h_steps, report)
        du_energy.append(energy)
        report.rows.append(RegularityRow("energy", "dy_u", lam, None, energy))

    report.checks.append(_flatness("energy_u", u_energy))
    report.checks.append(_flatness("energy_w", w_energy))
    report.checks.append(_stability("energy_dy_u", du_energy))
    if not medium.preset.has_h:
        report.checks.append(
            CheckResult(
                "w_equals_u", w_gap, w_gap <= 1e-10, f"max coefficient gap {w_gap:.3e}"
            )
        )

    consistency = corrector_service.viscosity_consistency(
        replace(base, lam=ladder[-1]), viscosities
    )
    for n, gap, dissipation in zip(
        consistency.viscosities, consistency.difference_norms, consistency.dissipation
    ):
        report.rows.append(RegularityRow("viscosity_gap", "u", ladder[-1], n, gap))
        report.rows.append(
            RegularityRow("viscous_dissipation", "u", ladder[-1], n, dissipation)
        )
    report.checks.append(
        CheckResult(
            "viscosity_decay",
            0.0 if consistency.decreasing() else 1.0,
            consistency.decreasing(),
            f"gaps {[f'{v:.2e}' for v in consistency.difference_norms]}",
        )
    )
    logger.info(
        f"Regularity suite for '{medium.preset_id}': "
        f"{'pass' if report.passed else 'FAIL'}"
    )
    return report


def _test_function(x: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
    """f = Σ cos x_i with its gradient and Hessian diagonal."""
    return np.sum(np.cos(x), axis=-1), -np.sin(x), -np.cos(x)


def generator_residual(
    medium: MediumSpec,
    x: Any,
    dts: list[float],
    viscosity: float = math.inf,
    viscous_noise: str = "display",
    engine: Optional[SimulationEngine] = None,
    samples: int = 0,
    seed: int = 0,
) -> ConvergenceReport:
    """One-step consistency of the simulated X^n with its divergence-form generator.

    At ε = 1 the generator is
    L^n f = ½ tr((a + n⁻¹Id)D²f) + (b + c − n⁻¹∂V)·Df.
    For f = Σ cos x_i the one-step Euler expectation is exact:
    E f(X_dt) = Σ cos(x_i + μ_i dt)·exp(−½Σ_ii dt). The residual
    |(E f(X_dt) − f(x))/dt − L^n f(x)| vanishes at Euler order only when
    the simulated viscous noise matches the generator. With an engine and
    samples > 0, a Monte Carlo estimate from actual steps is added.
    """
    point = np.atleast_1d(np.asarray(x, dtype=np.float64))
    ladder = validate_ladder(dts, "dt_ladder", decreasing=True)
    mode = "xn" if math.isfinite(viscosity) else "xeps"
    config = SimConfig(
        mode=mode,
        epsilon=1.0,
        viscosity=viscosity,
        viscous_noise=viscous_noise,
        paths=max(samples, 1),
        seed=seed,
    )
    dynamics = MultiscaleDynamics(medium, config)
    drift, sigma = dynamics.coefficients(point[None, :])
    covariance = sigma[0] @ sigma[0].T + config.viscous_scale**2 * np.eye(medium.dim)

    inverse = 0.0 if math.isinf(viscosity) else 1.0 / viscosity
    coefficients = eval_coeffs(medium, point, point)
    drifts = eval_drifts(medium, point, point)
    value, gradient, hessian = _test_function(point)
    generator_drift = drifts.b + drifts.c - inverse * medium.potential.gradient(
        point[None, :]
    )[0]
    diffusion = coefficients.a + inverse * np.eye(medium.dim)
    generator = float(
        0.5 * np.sum(np.diag(diffusion) * hessian) + generator_drift @ gradient
    )

    report = ConvergenceReport(
        ladder="dt",
        metadata={
            "preset_id": medium.preset_id,
            "x": point.tolist(),
            "viscosity": "inf" if math.isinf(viscosity) else viscosity,
            "viscous_noise": viscous_noise,
            "generator": generator,
        },
    )
    residuals = []
    for dt in ladder:
        expected = float(
            np.sum(
                np.cos(point + drift[0] * dt) * np.exp(-0.5 * np.diag(covariance) * dt)
            )
        )
        rate = (expected - float(value)) / dt
        residual = abs(rate - generator)
        residuals.append(residual)
        entry = LadderEntry(
            parameter=dt, metrics={"one_step_rate": rate, "residual": residual}
        )
        if engine is not None and samples > 1:
            moved = engine.one_step(config, dynamics, point, dt, samples)
            increments = (_test_function(moved)[0] - float(value)) / dt
            entry.metrics["mc_rate"] = float(increments.mean())
            entry.errors["mc_rate"] = float(
                increments.std(ddof=1) / math.sqrt(samples)
            )
        report.entries.append(entry)

    bound = 2.0 * residuals[0] * ladder[-1] / ladder[0] + ZERO_FLOOR
    report.checks.append(
        CheckResult(
            "euler_order",
            max(residuals[-1] - bound, 0.0),
            residuals[-1] <= bound,
            f"residual {residuals[0]:.3e} -> {residuals[-1]:.3e} "
            f"as dt {ladder[0]:g} -> {ladder[-1]:g}",
        )
    )
    return report

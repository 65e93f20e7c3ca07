"""Command implementations for the homog-lab command line.

Each command takes a CommandContext, writes its artifacts into the output
directory and returns an exit status. JSON artifacts carry the config hash
as a top-level "config_hash" key; CSV artifacts carry it in a leading
comment line.

Commands:
    validate  - structural assumptions and ergodicity of the medium
    effective - tensor table, kernel geometry and variational cross-check
    simulate  - one ensemble of X^ε, X^n or the limit process
    compare   - one diagnostic (ε ladder, ensemble pair, ergodic average,
                invariant measure, corrector regularity, generator residual)
    sec4      - the two-dimensional degenerate worked example
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from homog_lab.cli.errors import EXIT_FAILED_CRITERIA, EXIT_SUCCESS, UsageError
from homog_lab.cli.schema import ExperimentConfig
from homog_lab.core.corrector_service import CorrectorService
from homog_lab.core.diagnostics_service import (
    ConvergenceReport,
    LadderEntry,
    Observable,
    RegularityReport,
    convergence_ladder,
    ergodic_average_check,
    generator_residual,
    invariant_measure_check,
    regularity_suite,
    split_half,
    weak_distance,
)
from homog_lab.core.effective_service import (
    EffectiveService,
    EffectiveTensors,
    YGrid,
    kernel_and_geometry,
)
from homog_lab.core.galerkin import GalerkinBasis
from homog_lab.core.scenario import Sec4Scenario, Sec4Settings
from homog_lab.core.sde_engine import SimulationEngine, TrajectoryEnsemble
from homog_lab.medium.assumptions import (
    check_microscopic_ergodicity,
    validate_assumptions,
)
from homog_lab.medium.models import CheckResult, MediumSpec
from homog_lab.medium.presets import build_medium
from homog_lab.utils.io import (
    export_csv,
    load_ensemble,
    load_tensors,
    save_ensemble,
    write_json,
    write_rows,
)

logger = logging.getLogger(__name__)

MODE_ALIASES = {"eps": "xeps", "n": "xn", "limit": "limit"}


def _print_check(check: CheckResult) -> None:
    print(f"[{'PASS' if check.passed else 'FAIL'}] {check.check_name}: {check.detail}")


@dataclass
class CommandContext:
    """Everything a command needs besides its own logic.

    Attributes:
        config: Validated experiment config
        out_dir: Directory receiving the artifacts
        threads: Worker threads (speed only, never results)
        block_size: Paths per simulation block
    """

    config: ExperimentConfig
    out_dir: Path
    threads: int = 1
    block_size: int = 1024

    @property
    def digest(self) -> str:
        return self.config.digest

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def write(self, name: str, payload: dict[str, Any]) -> Path:
        return write_json(self.path(name), {"config_hash": self.digest, **payload})

    def write_table(self, name: str, header: list[str], rows: list[list[Any]]) -> Path:
        return write_rows(
            self.path(name), header, rows, comment=f"config_hash={self.digest}"
        )


def build_experiment_medium(config: ExperimentConfig) -> MediumSpec:
    return build_medium(
        config.medium.preset,
        config.medium.parameters,
        potential=config.potential.kind,
        variance=config.potential.variance,
        control_constant=config.medium.control_constant,
        regularity_constant=config.medium.regularity_constant,
    )


def build_corrector_service(config: ExperimentConfig, dim: int) -> CorrectorService:
    basis = GalerkinBasis(
        dim, config.basis.cutoff, quadrature_points=config.basis.quadrature_points
    )
    tolerances = config.tolerances
    return CorrectorService(
        basis,
        residual_tolerance=tolerances.residual,
        aliasing_tolerance=tolerances.aliasing,
        decay_tolerance=tolerances.decay,
    )


def build_engine(context: CommandContext) -> SimulationEngine:
    return SimulationEngine(threads=context.threads, block_size=context.block_size)


def _tabulate(
    context: CommandContext, medium: MediumSpec
) -> tuple[EffectiveService, EffectiveTensors]:
    config = context.config
    service = EffectiveService(
        build_corrector_service(config, medium.dim), threads=context.threads
    )
    grid = YGrid.cube(medium.dim, config.y_grid.extent, config.y_grid.points)
    tensors = service.tabulate(
        medium, grid, config.ladders.lambdas, {"config_hash": context.digest}
    )
    return service, tensors


def cmd_validate(context: CommandContext) -> int:
    """Write validation_report.json; exit 1 if an assumption fails.

    Ergodicity findings are warnings, never failures.
    """
    config = context.config
    medium = build_experiment_medium(config)
    report = validate_assumptions(
        medium,
        grid=config.basis.validation_grid,
        tolerance=config.tolerances.assumptions,
    )
    report.ergodicity = check_microscopic_ergodicity(
        medium, config.basis.ergodicity_cutoff
    )
    for warning in report.ergodicity.warnings:
        logger.warning(f"Ergodicity: {warning}")
        report.warnings.append(warning)

    context.write("validation_report.json", report.to_json())
    for check in report.checks:
        _print_check(check)
    return EXIT_SUCCESS if report.passed else EXIT_FAILED_CRITERIA


def cmd_effective(context: CommandContext) -> int:
    """Write effective_tensors.json and geometry_report.json.

    Exit 1 if the kernel geometry or the sandwich bound fails.
    """
    medium = build_experiment_medium(context.config)
    service, tensors = _tabulate(context, medium)
    geometry = kernel_and_geometry(tensors)
    variational = service.variational_a_tilde(medium)
    sandwich = service.sandwich_check(
        medium,
        tensors,
        variational.a_tilde,
        seed=context.config.simulation.seed,
        tolerance=context.config.tolerances.sandwich,
    )

    context.write("effective_tensors.json", tensors.to_json())
    context.write(
        "geometry_report.json",
        {
            "geometry": geometry.to_json(),
            "variational": variational.to_json(),
            "sandwich": sandwich.to_json(),
            "pass": geometry.passed and sandwich.passed,
        },
    )
    center = tensors.a_bar[tensors.y_grid.size // 2]
    print(f"A_bar at grid center: {np.array2string(center, precision=10)}")
    print(f"kernel dim {geometry.kernel_dim}")
    _print_check(sandwich)
    passed = geometry.passed and sandwich.passed
    return EXIT_SUCCESS if passed else EXIT_FAILED_CRITERIA


def _load_table(context: CommandContext, explicit: Optional[str]) -> EffectiveTensors:
    """Load the configured tensor table.

    Raises:
        MissingInputError: If the table does not exist
    """
    path = Path(explicit) if explicit else context.path("effective_tensors.json")
    return load_tensors(path)


def cmd_simulate(context: CommandContext, mode: Optional[str] = None) -> int:
    """Write ensemble_{mode}.bin, plus a CSV when the config asks for one.

    Raises:
        UsageError: If the mode alias is unknown
        MissingInputError: If limit mode finds no tensor table
    """
    config = context.config
    if mode is not None and mode not in MODE_ALIASES:
        raise UsageError(f"unknown mode '{mode}' (choose from {sorted(MODE_ALIASES)})")
    medium = build_experiment_medium(config)
    sim = config.sim_config(medium.dim, MODE_ALIASES[mode] if mode else None)
    engine = build_engine(context)

    if sim.mode == "limit":
        tensors = _load_table(context, config.simulation.tensors)
        ensemble = engine.simulate_limit(sim, tensors, medium.potential)
    elif sim.mode == "xn":
        ensemble = engine.simulate_xn(sim, medium)
    else:
        ensemble = engine.simulate_xeps(sim, medium)

    ensemble.metadata["experiment_hash"] = context.digest
    save_ensemble(context.path(f"ensemble_{sim.mode}.bin"), ensemble)
    if config.simulation.export_csv:
        export_csv(
            context.path(f"ensemble_{sim.mode}.csv"),
            ensemble,
            comment=f"config_hash={context.digest}",
        )
    print(
        f"{sim.mode}: {ensemble.path_count} paths, {ensemble.times.size} saved "
        f"times, {int(ensemble.flagged.sum())} flagged, "
        f"{int(ensemble.escaped.sum())} escaped"
    )
    return EXIT_SUCCESS


def _compare_ensembles(context: CommandContext) -> ConvergenceReport:
    """Weak distance between two stored ensembles.

    Raises:
        UsageError: If the config does not name exactly two files
    """
    files = context.config.compare.ensembles
    if len(files) != 2:
        raise UsageError("compare kind 'ensembles' needs exactly two ensemble files")
    first, second = (load_ensemble(name) for name in files)
    seed = context.config.simulation.seed
    distance = weak_distance(first, second, seed=seed)
    return ConvergenceReport(
        ladder="pair",
        entries=[
            LadderEntry(
                parameter=float(first.times[-1]),
                metrics={"energy_distance": distance.raw},
                errors={"energy_distance": distance.se},
            )
        ],
        metadata={
            "files": list(files),
            "distance": distance.to_json(),
            "split_half": [
                split_half(first, seed=seed).to_json(),
                split_half(second, seed=seed).to_json(),
            ],
        },
    )


def _invariant_ensemble(
    context: CommandContext, medium: MediumSpec
) -> TrajectoryEnsemble:
    files = context.config.compare.ensembles
    if files:
        return load_ensemble(files[0])
    sim = context.config.sim_config(medium.dim)
    if sim.initial.mode != "density":
        raise UsageError(
            "compare kind 'invariant' needs simulation.initial.mode 'density'"
        )
    engine = build_engine(context)
    if sim.mode == "xn":
        return engine.simulate_xn(sim, medium)
    return engine.simulate_xeps(sim, medium)


def _point(context: CommandContext, dim: int) -> list[float]:
    point = context.config.compare.point
    if point is None:
        return [0.0] * dim
    if len(point) != dim:
        raise UsageError(f"compare.point must have {dim} components")
    return list(point)


def _diagnostic(context: CommandContext) -> ConvergenceReport | RegularityReport:
    """Dispatch on compare.kind."""
    config = context.config
    kind = config.compare.kind
    medium = build_experiment_medium(config)
    engine = build_engine(context)
    report: ConvergenceReport | RegularityReport

    if kind == "ensembles":
        report = _compare_ensembles(context)
    elif kind == "ladder":
        if config.compare.tensors or context.path("effective_tensors.json").is_file():
            tensors = _load_table(context, config.compare.tensors)
        else:
            _, tensors = _tabulate(context, medium)
        report = convergence_ladder(
            engine,
            medium,
            tensors,
            config.ladders.epsilons,
            config.sim_config(medium.dim, "xeps"),
        )
    elif kind == "ergodic":
        observable = Observable(config.observable.name, config.observable.weighted)
        report = ergodic_average_check(
            engine,
            medium,
            config.ladders.epsilons,
            observable,
            config.sim_config(medium.dim, "xeps"),
        )
    elif kind == "invariant":
        report = invariant_measure_check(
            _invariant_ensemble(context, medium), medium.potential
        )
    elif kind == "regularity":
        report = regularity_suite(
            build_corrector_service(config, medium.dim),
            medium,
            _point(context, medium.dim),
            config.ladders.lambdas,
            config.ladders.viscosities,
            tuple(config.ladders.h_steps),
        )
    else:
        sim = config.simulation
        report = generator_residual(
            medium,
            _point(context, medium.dim),
            config.ladders.dts,
            viscosity=float("inf") if sim.viscosity is None else sim.viscosity,
            viscous_noise=sim.viscous_noise,
            engine=engine,
            samples=sim.paths,
            seed=sim.seed,
        )
    return report


def cmd_compare(context: CommandContext) -> int:
    """Run the configured diagnostic and write its report.

    Ladder-type diagnostics write convergence_report.json and .csv, the
    regularity suite writes regularity_report.json and .csv.
    """
    kind = context.config.compare.kind
    report = _diagnostic(context)

    stem = "regularity_report" if kind == "regularity" else "convergence_report"
    payload = report.to_json()
    payload["kind"] = kind
    context.write(f"{stem}.json", payload)
    header, rows = report.to_rows()
    context.write_table(f"{stem}.csv", header, rows)
    if isinstance(report, ConvergenceReport):
        print(report.render_table())
    else:
        for check in report.checks:
            _print_check(check)
    return EXIT_SUCCESS if report.passed else EXIT_FAILED_CRITERIA


def sec4_settings(config: ExperimentConfig) -> Sec4Settings:
    """Scenario settings from the scenario, ladder, grid and simulation sections."""
    sim = config.simulation
    tolerances = config.tolerances
    return Sec4Settings(
        c=config.scenario.c,
        ladder_delta=config.scenario.ladder_delta,
        basis_cutoff=config.basis.ergodicity_cutoff,
        lambdas=tuple(config.ladders.lambdas),
        y_extent=config.y_grid.extent,
        y_points=config.y_grid.points,
        epsilons=tuple(config.ladders.epsilons),
        horizon=sim.horizon,
        base_step=sim.base_step,
        limit_paths=config.scenario.limit_paths,
        ladder_paths=config.scenario.ladder_paths,
        save_count=sim.save_count,
        seed=sim.seed,
        tensor_tolerance=tolerances.tensor,
        variational_tolerance=tolerances.variational,
        angle_tolerance=tolerances.angle,
        confinement_tolerance=tolerances.confinement,
    )


def cmd_sec4(context: CommandContext) -> int:
    """Run the worked example and write sec4_summary.json."""
    settings = sec4_settings(context.config)
    service = EffectiveService(
        build_corrector_service(context.config, 2), threads=context.threads
    )
    scenario = Sec4Scenario(service, build_engine(context))
    summary = scenario.run(settings)

    payload = summary.to_json()
    payload["scenario_hash"] = payload.pop("config_hash")
    context.write("sec4_summary.json", payload)
    for warning in summary.warnings:
        logger.warning(warning)
    for criterion in summary.criteria:
        _print_check(criterion)
    return EXIT_SUCCESS if summary.passed else EXIT_FAILED_CRITERIA

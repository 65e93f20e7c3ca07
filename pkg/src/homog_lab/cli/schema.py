"""Experiment configuration schema.

One JSON file fixes every numerical parameter of a run. Unknown keys are
rejected at every level, and the SHA-256 of the canonical JSON form of the
validated config is embedded in every output.

Example:
    >>> from homog_lab.cli.schema import load_experiment
    >>> config = load_experiment("sec4.json")
    >>> config.medium.preset
    'sec4'
"""

import json
import math
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from homog_lab.core.sde_engine import InitialCondition, SimConfig
from homog_lab.utils.io import MissingInputError, config_hash


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class MediumSection(Section):
    preset: str = "constant"
    parameters: dict[str, Any] = Field(default_factory=dict)
    control_constant: Optional[float] = Field(default=None, gt=0)
    regularity_constant: Optional[float] = Field(default=None, gt=0)


class PotentialSection(Section):
    kind: Literal["gaussian", "flat"] = "gaussian"
    variance: float = Field(default=0.5, gt=0)


class BasisSection(Section):
    """K_gal (corrector cutoff), N_q and K_med (ergodicity cutoff)."""

    cutoff: int = Field(default=8, ge=1, le=64)
    quadrature_points: Optional[int] = Field(default=None, ge=4)
    ergodicity_cutoff: int = Field(default=4, ge=1)
    validation_grid: int = Field(default=32, ge=8)


class LadderSection(Section):
    lambdas: list[float] = Field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    viscosities: list[float] = Field(default_factory=lambda: [10.0, 100.0, 1000.0])
    epsilons: list[float] = Field(default_factory=lambda: [0.4, 0.2, 0.1])
    h_steps: list[float] = Field(default_factory=lambda: [1e-2, 1e-3])
    dts: list[float] = Field(default_factory=lambda: [1e-1, 1e-2, 1e-3])


class YGridSection(Section):
    extent: float = Field(default=3.0, gt=0)
    points: int = Field(default=9, ge=3)


class InitialSection(Section):
    mode: Literal["point", "density"] = "density"
    x0: Optional[list[float]] = None


class SimulationSection(Section):
    """Fields of one simulation run.

    viscosity None means n = ∞. tensors names the table read in limit mode,
    by default effective_tensors.json in the output directory.
    """

    mode: Literal["xeps", "xn", "limit"] = "xeps"
    epsilon: float = Field(default=1.0, gt=0)
    viscosity: Optional[float] = Field(default=None, ge=1)
    horizon: float = Field(default=1.0, gt=0)
    base_step: float = Field(default=0.02, gt=0)
    paths: int = Field(default=1000, ge=1)
    seed: int = Field(default=0, ge=0)
    initial: InitialSection = Field(default_factory=InitialSection)
    save_count: int = Field(default=1, ge=1)
    viscous_noise: Literal["display", "generator"] = "display"
    export_csv: bool = False
    tensors: Optional[str] = None


class ObservableSection(Section):
    name: Literal["sin_x1", "two_plus_sin_x1", "y_only"] = "sin_x1"
    weighted: bool = False


class CompareSection(Section):
    """Which diagnostic `compare` runs.

    Attributes:
        kind: ladder, ensembles, ergodic, invariant, regularity or generator
        ensembles: Two ensemble files for kind "ensembles", one density-started
            file for kind "invariant" (simulated when omitted)
        tensors: Tensor table for kind "ladder" (tabulated when omitted)
        point: y for the regularity suite, x for the generator residual
    """

    kind: Literal[
        "ladder", "ensembles", "ergodic", "invariant", "regularity", "generator"
    ] = "ladder"
    ensembles: list[str] = Field(default_factory=list)
    tensors: Optional[str] = None
    point: Optional[list[float]] = None


class ToleranceSection(Section):
    assumptions: float = Field(default=1e-10, ge=0)
    residual: float = Field(default=1e-10, gt=0)
    aliasing: float = Field(default=1e-6, gt=0)
    decay: float = Field(default=1e-8, ge=0)
    sandwich: float = Field(default=1e-6, ge=0)
    tensor: float = Field(default=1e-8, ge=0)
    variational: float = Field(default=1e-8, ge=0)
    angle: float = Field(default=1e-6, ge=0)
    confinement: float = Field(default=1e-8, ge=0)


class ScenarioSection(Section):
    """Worked-example overrides; grid, ladders and step sizes come from the rest."""

    c: float = 2.0
    ladder_delta: float = Field(default=1.0, ge=0, lt=2)
    limit_paths: int = Field(default=1000, ge=1)
    ladder_paths: int = Field(default=10_000, ge=0)

    @field_validator("c")
    @classmethod
    def _nonzero(cls, value: float) -> float:
        if value == 0:
            raise ValueError("c must be nonzero")
        return value


class ExperimentConfig(Section):
    """Validated experiment config."""

    medium: MediumSection = Field(default_factory=MediumSection)
    potential: PotentialSection = Field(default_factory=PotentialSection)
    basis: BasisSection = Field(default_factory=BasisSection)
    ladders: LadderSection = Field(default_factory=LadderSection)
    y_grid: YGridSection = Field(default_factory=YGridSection)
    simulation: SimulationSection = Field(default_factory=SimulationSection)
    observable: ObservableSection = Field(default_factory=ObservableSection)
    compare: CompareSection = Field(default_factory=CompareSection)
    tolerances: ToleranceSection = Field(default_factory=ToleranceSection)
    scenario: ScenarioSection = Field(default_factory=ScenarioSection)
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def _finite_numbers(self) -> "ExperimentConfig":
        for value in _numbers(self.model_dump()):
            if not math.isfinite(value):
                raise ValueError("config values must be finite")
        return self

    @property
    def digest(self) -> str:
        return config_hash(self.model_dump(mode="json"))

    def sim_config(self, dim: int, mode: Optional[str] = None) -> SimConfig:
        """SimConfig of the simulation section, optionally with another mode.

        A point initial law without x0 starts at the origin of R^dim.
        """
        sim = self.simulation
        initial = sim.initial
        x0 = tuple(initial.x0) if initial.x0 is not None else None
        return SimConfig(
            mode=mode or sim.mode,
            epsilon=sim.epsilon,
            viscosity=math.inf if sim.viscosity is None else sim.viscosity,
            horizon=sim.horizon,
            base_step=sim.base_step,
            paths=sim.paths,
            seed=sim.seed,
            initial=InitialCondition(initial.mode, x0 or (0.0,) * dim),
            save_count=sim.save_count,
            viscous_noise=sim.viscous_noise,
            tensor_table=sim.tensors,
        )


def _numbers(value: Any) -> list[float]:
    if isinstance(value, bool):
        return []
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, dict):
        return [n for item in value.values() for n in _numbers(item)]
    if isinstance(value, (list, tuple)):
        return [n for item in value for n in _numbers(item)]
    return []


def load_experiment(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate an experiment config.

    Raises:
        MissingInputError: If the file is absent or not JSON
        pydantic.ValidationError: If the content violates the schema
    """
    source = Path(path)
    if not source.is_file():
        raise MissingInputError(f"Config file not found: {source}")
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise MissingInputError(f"Invalid JSON in {source}: {e}") from e
    return ExperimentConfig.model_validate(data)

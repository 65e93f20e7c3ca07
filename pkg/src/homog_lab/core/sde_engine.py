"""Simulation Engine - Euler-Maruyama ensembles of the multiscale processes.

Three processes share one integrator:

- X^ε: dX = [ε⁻¹b(X/ε, X) + c(X/ε, X)]dt + σ(X/ε, X)dB
- X^n: X^ε plus −n⁻¹∂V(X)dt and an independent scaled increment dB̃
- the limit diffusion: dX = B̄(X)dt + Ā^{1/2}(X)dB with tabulated tensors

Every path owns counter-based Philox streams keyed by (seed, path id,
stream), so ensembles are bit-identical for any worker count. Paths are
processed in fixed-size blocks and merged by block index.

Example:
    >>> engine = SimulationEngine(threads=4)
    >>> config = SimConfig(mode="xeps", epsilon=0.2, horizon=1.0, paths=1000)
    >>> ensemble = engine.simulate_xeps(config, build_medium("sine1d"))
    >>> ensemble.final_states().shape
    (1000, 1)
"""

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Optional, Protocol

import numpy as np
import numpy.typing as npt

from homog_lab.core.effective_service import EffectiveTensors, TensorInterpolator
from homog_lab.core.linalg import sqrt_psd_batch
from homog_lab.medium.evaluation import drifts_batch, reduce_fast
from homog_lab.medium.models import MediumSpec
from homog_lab.medium.potentials import FlatPotential, Potential
from homog_lab.utils.validators import ValidationError

FloatArray = npt.NDArray[np.float64]
BoolArray = npt.NDArray[np.bool_]
PathFunctional = Callable[[FloatArray], FloatArray]

logger = logging.getLogger(__name__)

MODES = ("xeps", "xn", "limit")
VISCOUS_NOISE = ("display", "generator")
NOISE_CHUNK = 1024
DEFAULT_BLOCK_SIZE = 1024
FLAGGED_BUDGET = 0.01

MAIN_STREAM = 0
VISCOUS_STREAM = 1


class SimulationError(Exception):
    """Raised when too many paths blow up during a simulation."""

    pass


@dataclass(frozen=True)
class InitialCondition:
    """Initial law: a point mass at x0 or the invariant density e^{−2V}dx."""

    mode: str = "point"
    x0: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        if self.mode not in ("point", "density"):
            raise ValidationError(
                f"initial mode must be 'point' or 'density' (got '{self.mode}')"
            )


@dataclass(frozen=True)
class SimConfig:
    """One simulation run.

    Attributes:
        mode: "xeps", "xn" or "limit"
        epsilon: Scale ε > 0 (ignored in limit mode)
        viscosity: n ∈ [1, ∞]; math.inf switches the viscous terms off
        horizon: Final time T
        base_step: dt₀; the step is dt₀ε² for X^ε and X^n, dt₀ in limit mode
        paths: Path count P
        seed: Master seed
        initial: Initial law
        save_count: Number of saved intervals; states are kept at
            save_count + 1 evenly spaced steps including 0 and T
        viscous_noise: "display" scales B̃ by (n/2)^{-1/2}, "generator" by
            n^{-1/2}
        tensor_table: Path of the tensor table (limit mode, provenance only)
    """

    mode: str = "xeps"
    epsilon: float = 1.0
    viscosity: float = math.inf
    horizon: float = 1.0
    base_step: float = 0.02
    paths: int = 1000
    seed: int = 0
    initial: InitialCondition = field(default_factory=InitialCondition)
    save_count: int = 1
    viscous_noise: str = "display"
    tensor_table: Optional[str] = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES} (got '{self.mode}')")
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be positive (got {self.epsilon})")
        if not self.viscosity >= 1:
            raise ValidationError(f"viscosity must be >= 1 (got {self.viscosity})")
        if not self.horizon > 0:
            raise ValidationError(f"horizon must be positive (got {self.horizon})")
        if not self.base_step > 0:
            raise ValidationError(f"base_step must be positive (got {self.base_step})")
        if self.paths < 1:
            raise ValidationError(f"paths must be >= 1 (got {self.paths})")
        if self.save_count < 1:
            raise ValidationError(f"save_count must be >= 1 (got {self.save_count})")
        if self.viscous_noise not in VISCOUS_NOISE:
            raise ValidationError(
                f"viscous_noise must be one of {VISCOUS_NOISE} "
                f"(got '{self.viscous_noise}')"
            )

    @property
    def step(self) -> float:
        """Nominal step before rounding to an integer step count."""
        if self.mode == "limit":
            return self.base_step
        return self.base_step * self.epsilon**2

    @property
    def steps(self) -> int:
        return max(1, int(round(self.horizon / self.step)))

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def viscous(self) -> bool:
        return self.mode == "xn" and math.isfinite(self.viscosity)

    @property
    def viscous_scale(self) -> float:
        """Coefficient of the extra increment dB̃."""
        if not self.viscous:
            return 0.0
        if self.viscous_noise == "display":
            return math.sqrt(2.0 / self.viscosity)
        return math.sqrt(1.0 / self.viscosity)

    def save_indices(self) -> npt.NDArray[np.int64]:
        grid = np.linspace(0, self.steps, min(self.save_count, self.steps) + 1)
        indices: npt.NDArray[np.int64] = np.unique(np.round(grid).astype(np.int64))
        return indices

    def to_json(self) -> dict[str, Any]:
        data = asdict(self)
        data["viscosity"] = "inf" if math.isinf(self.viscosity) else self.viscosity
        data["initial"] = {"mode": self.initial.mode, "x0": list(self.initial.x0)}
        return data

    def content_hash(self) -> str:
        canonical = json.dumps(self.to_json(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class TrajectoryEnsemble:
    """Saved states of every path.

    Attributes:
        times: Saved times, shape (S,)
        states: States, shape (P, S, d); NaN after a blow-up
        path_ids: Path id per row (also the RNG stream key)
        flagged: Paths that produced a non-finite state
        escaped: Paths that left the tensor-table domain (limit mode)
        metadata: Config hash, mode, step and counts
        integrals: Left-point time integrals of a path functional at the
            saved times, shape (P, S), when one was requested
    """

    times: FloatArray
    states: FloatArray
    path_ids: npt.NDArray[np.int64]
    flagged: BoolArray
    escaped: BoolArray
    metadata: dict[str, Any] = field(default_factory=dict)
    integrals: Optional[FloatArray] = None

    @property
    def dim(self) -> int:
        return int(self.states.shape[2])

    @property
    def path_count(self) -> int:
        return int(self.states.shape[0])

    @property
    def valid(self) -> BoolArray:
        mask: BoolArray = ~(self.flagged | self.escaped)
        return mask

    def states_at(self, index: int) -> FloatArray:
        """States of valid paths at saved time index, shape (P_valid, d)."""
        selected: FloatArray = self.states[self.valid, index, :]
        return selected

    def final_states(self) -> FloatArray:
        return self.states_at(-1)


def sample_initial(
    potential: Potential,
    count: int,
    seed: int,
    initial: Optional[InitialCondition] = None,
) -> FloatArray:
    """Initial points from e^{−2V(x)}dx or a point mass.

    Raises:
        UnsupportedPresetError: If density mode is used with a potential
            lacking an exact sampler
        ValidationError: If the point mass has the wrong dimension
    """
    initial = initial or InitialCondition(mode="density")
    if initial.mode == "point":
        x0 = np.asarray(initial.x0, dtype=np.float64)
        if x0.shape != (potential.dim,):
            raise ValidationError(
                f"x0 must have {potential.dim} coordinates (got {len(initial.x0)})"
            )
        return np.tile(x0, (count, 1))
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    return potential.sample(count, rng)


def path_generator(seed: int, path_id: int, stream: int) -> np.random.Generator:
    """Philox generator of one path's stream."""
    sequence = np.random.SeedSequence(seed, spawn_key=(int(path_id), int(stream)))
    return np.random.Generator(np.random.Philox(sequence))


class Dynamics(Protocol):
    dim: int

    def coefficients(self, x: FloatArray) -> tuple[FloatArray, FloatArray]:
        """Drift (N, d) and diffusion factor (N, d, d) at states x."""
        ...

    def inside(self, x: FloatArray) -> BoolArray: ...


class MultiscaleDynamics:
    """Coefficients of X^ε and X^n at macro states x."""

    def __init__(self, medium: MediumSpec, config: SimConfig) -> None:
        self.medium = medium
        self.dim = medium.dim
        self.epsilon = config.epsilon
        self.inverse_viscosity = 1.0 / config.viscosity if config.viscous else 0.0

    def coefficients(self, x: FloatArray) -> tuple[FloatArray, FloatArray]:
        micro = reduce_fast(x / self.epsilon)
        drifts = drifts_batch(self.medium, micro, x)
        drift = drifts.b / self.epsilon + drifts.c
        if self.inverse_viscosity:
            drift = drift - self.inverse_viscosity * self.medium.potential.gradient(x)
        return drift, self.medium.preset.sigma(micro, x)

    def inside(self, x: FloatArray) -> BoolArray:
        return np.ones(x.shape[0], dtype=bool)


class LimitDynamics:
    """Coefficients of the limit diffusion from interpolated tables.

    Ā is interpolated first and rooted afterwards, which keeps it PSD.
    """

    def __init__(self, interpolator: TensorInterpolator) -> None:
        self.interpolator = interpolator
        self.dim = interpolator.dim

    def coefficients(self, x: FloatArray) -> tuple[FloatArray, FloatArray]:
        a_bar, b_bar, _ = self.interpolator(x)
        return b_bar, sqrt_psd_batch(a_bar, check=False)

    def inside(self, x: FloatArray) -> BoolArray:
        return self.interpolator.grid.contains(x)


class _NoiseSource:
    """Chunked standard normals from per-path generators."""

    def __init__(
        self, seed: int, path_ids: npt.NDArray[np.int64], stream: int, dim: int
    ) -> None:
        self.generators = [path_generator(seed, p, stream) for p in path_ids]
        self.dim = dim
        self._buffer = np.empty((0, len(path_ids), dim))
        self._cursor = 0

    def next(self, remaining: int) -> FloatArray:
        if self._cursor >= self._buffer.shape[0]:
            chunk = min(NOISE_CHUNK, remaining)
            self._buffer = np.stack(
                [g.standard_normal((chunk, self.dim)) for g in self.generators],
                axis=1,
            )
            self._cursor = 0
        draw: FloatArray = self._buffer[self._cursor]
        self._cursor += 1
        return draw


@dataclass
class _BlockResult:
    states: FloatArray
    flagged: BoolArray
    escaped: BoolArray
    integrals: Optional[FloatArray] = None


class SimulationEngine:
    """Service running Euler-Maruyama ensembles.

    Blocks of paths run on a thread pool; the block size is part of the run
    definition and results never depend on the thread count.
    """

    def __init__(self, threads: int = 1, block_size: int = DEFAULT_BLOCK_SIZE) -> None:
        """Initialize simulation engine.

        Args:
            threads: Worker threads
            block_size: Paths per block

        Raises:
            ValidationError: If either argument is below 1
        """
        if threads < 1 or block_size < 1:
            raise ValidationError(
                f"threads and block_size must be >= 1 (got {threads}, {block_size})"
            )
        self.threads = int(threads)
        self.block_size = int(block_size)

    def simulate_xeps(
        self,
        config: SimConfig,
        medium: MediumSpec,
        functional: Optional[PathFunctional] = None,
    ) -> TrajectoryEnsemble:
        """Ensemble of X^ε with step dt₀ε².

        Args:
            config: Run definition
            medium: Medium supplying b, c and σ
            functional: Optional f(states) -> (N,) integrated along each path

        Raises:
            ValidationError: If the config is in limit mode or viscous
            SimulationError: If more than 1% of the paths blow up
        """
        if config.mode == "limit":
            raise ValidationError("simulate_xeps needs mode 'xeps' or 'xn'")
        if config.viscous:
            raise ValidationError("simulate_xeps runs without viscosity")
        dynamics = MultiscaleDynamics(medium, config)
        return self._simulate(config, dynamics, medium.potential, functional)

    def simulate_xn(
        self,
        config: SimConfig,
        medium: MediumSpec,
        functional: Optional[PathFunctional] = None,
    ) -> TrajectoryEnsemble:
        """Ensemble of X^n; n = ∞ is the same computation as X^ε."""
        if config.mode == "limit":
            raise ValidationError("simulate_xn needs mode 'xeps' or 'xn'")
        dynamics = MultiscaleDynamics(medium, config)
        return self._simulate(config, dynamics, medium.potential, functional)

    def simulate_limit(
        self,
        config: SimConfig,
        tensors: EffectiveTensors,
        potential: Optional[Potential] = None,
    ) -> TrajectoryEnsemble:
        """Ensemble of the limit diffusion driven by tabulated Ā and B̄.

        Paths leaving the table domain are flagged as escaped and frozen.

        Raises:
            ValidationError: If density initial laws come without a potential
        """
        if config.mode != "limit":
            raise ValidationError("simulate_limit needs mode 'limit'")
        if potential is None and config.initial.mode == "density":
            raise ValidationError("density initial law needs a potential")
        dynamics = LimitDynamics(tensors.interpolator())
        source = potential if potential is not None else FlatPotential(tensors.dim)
        return self._simulate(config, dynamics, source)

    def simulate(
        self,
        config: SimConfig,
        medium: MediumSpec,
        tensors: Optional[EffectiveTensors] = None,
    ) -> TrajectoryEnsemble:
        """Dispatch on config.mode."""
        if config.mode == "limit":
            if tensors is None:
                raise ValidationError("limit mode needs a tensor table")
            return self.simulate_limit(config, tensors, medium.potential)
        if config.mode == "xn":
            return self.simulate_xn(config, medium)
        return self.simulate_xeps(config, medium)

    def one_step(
        self,
        config: SimConfig,
        dynamics: Dynamics,
        x: FloatArray,
        dt: float,
        count: int,
    ) -> FloatArray:
        """`count` independent single Euler steps of size dt from one point."""
        start = np.tile(np.asarray(x, dtype=np.float64), (count, 1))
        ids = np.arange(count, dtype=np.int64)
        main = _NoiseSource(config.seed, ids, MAIN_STREAM, dynamics.dim)
        extra = (
            _NoiseSource(config.seed, ids, VISCOUS_STREAM, dynamics.dim)
            if config.viscous
            else None
        )
        return self._advance(dynamics, start, dt, main, extra, config, 1)

    def _simulate(
        self,
        config: SimConfig,
        dynamics: Dynamics,
        potential: Potential,
        functional: Optional[PathFunctional] = None,
    ) -> TrajectoryEnsemble:
        if potential.dim != dynamics.dim:
            raise ValidationError(
                f"potential dimension {potential.dim} != medium dimension "
                f"{dynamics.dim}"
            )
        start = sample_initial(potential, config.paths, config.seed, config.initial)
        outside = int((~dynamics.inside(start)).sum())
        ids = np.arange(config.paths, dtype=np.int64)
        size = self.block_size
        blocks = [ids[i : i + size] for i in range(0, config.paths, size)]
        logger.info(
            f"Simulating {config.mode}: P={config.paths}, steps={config.steps}, "
            f"dt={config.dt:.3e}, {len(blocks)} block(s), {self.threads} thread(s)"
        )

        def work(block: npt.NDArray[np.int64]) -> _BlockResult:
            return self._run_block(config, dynamics, block, start[block], functional)

        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            results = list(executor.map(work, blocks))

        states = np.concatenate([r.states for r in results], axis=0)
        flagged = np.concatenate([r.flagged for r in results])
        escaped = np.concatenate([r.escaped for r in results])
        integrals = (
            np.concatenate([r.integrals for r in results if r.integrals is not None])
            if functional is not None
            else None
        )
        self._check_budget(flagged, escaped, outside)

        indices = config.save_indices()
        return TrajectoryEnsemble(
            times=indices.astype(np.float64) * config.dt,
            states=states,
            path_ids=ids,
            flagged=flagged,
            escaped=escaped,
            metadata={
                "config_hash": config.content_hash(),
                "mode": config.mode,
                "dim": dynamics.dim,
                "paths": config.paths,
                "dt": config.dt,
                "steps": config.steps,
                "flagged": int(flagged.sum()),
                "escaped": int(escaped.sum()),
                "escaped_at_start": outside,
                "initial": config.initial.mode,
                "horizon": config.horizon,
                "seed": config.seed,
            },
            integrals=integrals,
        )

    def _check_budget(
        self, flagged: BoolArray, escaped: BoolArray, outside: int = 0
    ) -> None:
        """Log excluded paths; raise when blow-ups exceed the budget.

        Escaped paths, including those started outside the tensor table, are
        excluded from moments as well; more than the same share only warns.
        """
        count = int(flagged.sum())
        if count:
            logger.warning(f"{count} path(s) blew up and were excluded")
        left = int(escaped.sum())
        if outside:
            logger.warning(
                f"{outside} path(s) started outside the tensor table and were excluded"
            )
        if left > outside:
            logger.warning(f"{left - outside} path(s) left the tensor table")
        if left > FLAGGED_BUDGET * escaped.size:
            logger.warning(
                f"Escaped paths exceed the {FLAGGED_BUDGET:.0%} budget "
                f"({left}/{escaped.size}); moments over the rest are biased"
            )
        if count > FLAGGED_BUDGET * flagged.size:
            logger.error(f"Blow-up budget exceeded: {count}/{flagged.size}")
            raise SimulationError(
                f"{count} of {flagged.size} paths produced non-finite states "
                f"(budget {FLAGGED_BUDGET:.0%})"
            )

    def _run_block(
        self,
        config: SimConfig,
        dynamics: Dynamics,
        path_ids: npt.NDArray[np.int64],
        start: FloatArray,
        functional: Optional[PathFunctional] = None,
    ) -> _BlockResult:
        d = dynamics.dim
        main = _NoiseSource(config.seed, path_ids, MAIN_STREAM, d)
        extra = (
            _NoiseSource(config.seed, path_ids, VISCOUS_STREAM, d)
            if config.viscous
            else None
        )
        save = config.save_indices()
        states = np.full((path_ids.size, save.size, d), np.nan)
        flagged = np.zeros(path_ids.size, dtype=bool)
        escaped = ~dynamics.inside(start)

        integrals = (
            np.zeros((path_ids.size, save.size)) if functional is not None else None
        )
        accumulated = np.zeros(path_ids.size)

        x = start.copy()
        states[:, 0, :] = x
        slot = 1
        for step in range(1, config.steps + 1):
            active = ~(flagged | escaped)
            if functional is not None:
                accumulated += np.where(active, functional(x), 0.0) * config.dt
            proposed = self._advance(
                dynamics, x, config.dt, main, extra, config, config.steps - step + 1
            )
            blown = active & ~np.all(np.isfinite(proposed), axis=1)
            flagged |= blown
            moving = active & ~blown
            x = np.where(moving[:, None], proposed, x)
            escaped |= moving & ~dynamics.inside(x)
            if slot < save.size and step == save[slot]:
                states[:, slot, :] = np.where(flagged[:, None], np.nan, x)
                if integrals is not None:
                    integrals[:, slot] = accumulated
                slot += 1

        logger.debug(
            f"Block of {path_ids.size} paths from id {int(path_ids[0])} done, "
            f"{int(flagged.sum())} flagged"
        )
        return _BlockResult(
            states=states, flagged=flagged, escaped=escaped, integrals=integrals
        )

    @staticmethod
    def _advance(
        dynamics: Dynamics,
        x: FloatArray,
        dt: float,
        main: _NoiseSource,
        extra: Optional[_NoiseSource],
        config: SimConfig,
        remaining: int,
    ) -> FloatArray:
        xi = main.next(remaining)
        with np.errstate(over="ignore", invalid="ignore"):
            drift, diffusion = dynamics.coefficients(x)
            increment = np.einsum("nij,nj->ni", diffusion, xi)
            proposed: FloatArray = x + drift * dt + increment * math.sqrt(dt)
            if extra is not None:
                scale = config.viscous_scale * math.sqrt(dt)
                proposed = proposed + scale * extra.next(remaining)
        return proposed


"""Unit tests for the Diagnostics Service.

Tests cover:
- Energy distance (symmetry, zero on identical samples, batching)
- Weak distance and split-half guards
- Trend and null verdicts
- Kernel confinement and the ε convergence ladder
- Observables and the ergodic averaging check
- Invariance of e^{−2V} for an Ornstein-Uhlenbeck medium
- Corrector regularity suite and generator residuals
- Report rendering
"""

import math

import numpy as np
import pytest

from homog_lab.core.diagnostics_service import (
    ConvergenceReport,
    LadderEntry,
    Observable,
    convergence_ladder,
    energy_distance,
    ergodic_average_check,
    generator_residual,
    invariant_measure_check,
    kernel_confinement,
    null_check,
    regularity_suite,
    split_half,
    trend_check,
    weak_distance,
)
from homog_lab.core.effective_service import EffectiveTensors, YGrid
from homog_lab.core.sde_engine import (
    InitialCondition,
    SimConfig,
    SimulationEngine,
    TrajectoryEnsemble,
)
from homog_lab.medium.models import CheckResult
from homog_lab.medium.potentials import build_potential
from homog_lab.medium.presets import build_medium
from homog_lab.utils.validators import ValidationError

KERNEL = np.array([2.0, -1.0]) / np.sqrt(5.0)


def _ensemble(
    final: np.ndarray, horizon: float = 1.0, initial: str = "point"
) -> TrajectoryEnsemble:
    paths = final.shape[0]
    states = np.stack([np.zeros_like(final), final], axis=1)
    return TrajectoryEnsemble(
        times=np.array([0.0, horizon]),
        states=states,
        path_ids=np.arange(paths),
        flagged=np.zeros(paths, dtype=bool),
        escaped=np.zeros(paths, dtype=bool),
        metadata={"initial": initial},
    )


def _sec4_table(sec4_reference: np.ndarray) -> EffectiveTensors:
    grid = YGrid.cube(2, 6.0, 5)
    return EffectiveTensors(
        y_grid=grid,
        a_bar=np.broadcast_to(sec4_reference, (grid.size, 2, 2)).copy(),
        h_bar=np.zeros((grid.size, 2, 2)),
        b_bar=-grid.nodes() @ sec4_reference,
        boundary=grid.boundary_mask(),
        kernel_basis=KERNEL[:, None].copy(),
        ellipticity=(6.25, 6.25),
    )


@pytest.mark.unit
class TestEnergyDistance:
    """Test the energy distance estimator."""

    def test_identical_samples_give_exact_zero(self) -> None:
        """Test that D(X, X) = 0 exactly."""
        sample = np.random.default_rng(0).standard_normal((300, 2))

        result = energy_distance(sample, sample)

        assert result.raw == 0.0
        assert result.value == 0.0

    def test_estimate_is_exactly_symmetric(self) -> None:
        """Test that D(X, Y) = D(Y, X) bit for bit."""
        rng = np.random.default_rng(1)
        first = rng.standard_normal((250, 2))
        second = rng.standard_normal((250, 2)) + 0.5

        assert energy_distance(first, second).raw == energy_distance(second, first).raw

    def test_separated_laws_are_detected(self) -> None:
        """Test that N(0, 1) and N(3, 1) are far apart."""
        rng = np.random.default_rng(2)
        first = rng.standard_normal((400, 1))
        second = rng.standard_normal((400, 1)) + 3.0

        result = energy_distance(first, second, seed=5)

        assert result.value > 1.0
        assert result.value > 10 * result.se

    def test_batch_size_respects_pair_cap(self) -> None:
        """Test m = max(2, min(n/2, cap/n))."""
        sample = np.random.default_rng(3).standard_normal((400, 1))

        default = energy_distance(sample, sample + 1.0)
        capped = energy_distance(sample, sample + 1.0, pair_cap=4000)

        assert (default.batch_size, default.batches) == (200, 2)
        assert (capped.batch_size, capped.batches) == (10, 40)

    def test_dimension_mismatch_raises(self) -> None:
        """Test that samples of different dimension are rejected."""
        with pytest.raises(ValidationError, match="shapes differ"):
            energy_distance(np.zeros((10, 1)), np.zeros((10, 2)))

    def test_tiny_samples_raise(self) -> None:
        """Test that fewer than 4 points are rejected."""
        with pytest.raises(ValidationError, match=">= 4"):
            energy_distance(np.zeros((3, 1)), np.zeros((3, 1)))


@pytest.mark.unit
class TestEnsembleDistances:
    """Test weak_distance and split_half."""

    def test_different_horizons_raise(self) -> None:
        """Test that ensembles at different final times are not compared."""
        sample = np.random.default_rng(4).standard_normal((120, 1))

        with pytest.raises(ValidationError) as exc_info:
            weak_distance(_ensemble(sample, 1.0), _ensemble(sample, 2.0))

        assert "different times" in str(exc_info.value)

    def test_small_ensembles_raise(self) -> None:
        """Test that fewer than 100 valid paths are rejected."""
        sample = np.random.default_rng(5).standard_normal((50, 1))

        with pytest.raises(ValidationError, match=">= 100"):
            weak_distance(_ensemble(sample), _ensemble(sample))

    def test_weak_distance_of_equal_ensembles(self) -> None:
        """Test that an ensemble is at distance 0 from itself."""
        ensemble = _ensemble(np.random.default_rng(6).standard_normal((150, 2)))

        assert weak_distance(ensemble, ensemble).raw == 0.0

    def test_split_half_uses_both_halves(self) -> None:
        """Test that the split-half null compares P/2 against P/2 points."""
        ensemble = _ensemble(np.random.default_rng(7).standard_normal((200, 1)))

        result = split_half(ensemble)

        assert result.batch_size * result.batches == 100
        assert math.isfinite(result.raw)


@pytest.mark.unit
class TestVerdicts:
    """Test trend and null checks."""

    def test_trend_passes_on_clear_decrease(self) -> None:
        """Test that a drop beyond two combined SEs passes."""
        check = trend_check("trend", (1.0, 0.1), (0.2, 0.1))

        assert check.passed
        assert check.margin == 0.0

    def test_trend_fails_within_noise(self) -> None:
        """Test that a drop inside the noise fails."""
        check = trend_check("trend", (1.0, 0.5), (0.8, 0.5))

        assert not check.passed
        assert check.margin > 0.0

    def test_identically_zero_metric_passes(self) -> None:
        """Test the degenerate all-zero ladder."""
        assert trend_check("trend", (0.0, 0.0), (0.0, 0.0)).passed

    def test_null_check(self) -> None:
        """Test values within and beyond three SEs of the null."""
        inside = null_check("null", [(0.1, 0.05), (0.05, 0.05)], (0.0, 0.05))
        outside = null_check("null", [(1.0, 0.05)], (0.0, 0.05))

        assert inside.passed
        assert not outside.passed


@pytest.mark.unit
class TestKernelConfinement:
    """Test kernel_confinement and the convergence ladder."""

    def test_confinement_of_kernel_free_paths(self) -> None:
        """Test that paths moving along K^⊥ report zero."""
        direction = np.array([1.0, 2.0]) / np.sqrt(5.0)
        final = np.outer(np.linspace(-1.0, 1.0, 10), direction)

        value = kernel_confinement(_ensemble(final), KERNEL[:, None], [0.0, 0.0])

        assert value == pytest.approx(0.0, abs=1e-15)

    def test_confinement_detects_kernel_motion(self) -> None:
        """Test that a displacement along k is measured."""
        final = np.tile(0.3 * KERNEL, (5, 1))

        value = kernel_confinement(_ensemble(final), KERNEL[:, None], [0.0, 0.0])

        assert value == pytest.approx(0.3)

    def test_empty_kernel_returns_zero(self) -> None:
        """Test that a full-rank Ā has nothing to confine."""
        ensemble = _ensemble(np.ones((5, 2)))

        assert kernel_confinement(ensemble, np.zeros((2, 0)), [0.0, 0.0]) == 0.0

    def test_convergence_ladder_on_degenerate_medium(
        self, sec4_medium, sec4_reference
    ) -> None:
        """Test the report structure and exact confinement of both processes."""
        # Arrange
        engine = SimulationEngine(threads=1, block_size=128)
        config = SimConfig(
            horizon=0.2,
            base_step=0.02,
            paths=120,
            seed=4,
            initial=InitialCondition("point", (0.0, 0.0)),
        )
        tensors = _sec4_table(sec4_reference)

        # Act
        report = convergence_ladder(
            engine, sec4_medium, tensors, [0.5, 0.25, 0.125], config
        )

        # Assert
        assert [entry.parameter for entry in report.entries] == [0.5, 0.25, 0.125]
        assert all(entry.metrics["confinement"] < 1e-10 for entry in report.entries)
        assert {check.check_name for check in report.checks} == {
            "energy_distance_null",
            "limit_confinement",
        }
        confinement = [c for c in report.checks if c.check_name == "limit_confinement"]
        assert confinement[0].passed
        assert report.metadata["kernel_dim"] == 1


@pytest.mark.unit
class TestObservables:
    """Test the observable catalog."""

    def test_unknown_observable_raises(self) -> None:
        """Test that only catalog names are accepted."""
        with pytest.raises(ValidationError, match="unknown observable"):
            Observable("cos_x2")

    def test_values_and_averages(self) -> None:
        """Test Ψ and Ψ̄ for the shifted sine."""
        observable = Observable("two_plus_sin_x1")
        x = np.array([[np.pi / 2]])
        y = np.array([[0.0]])

        assert observable.value(x, y)[0] == pytest.approx(3.0)
        assert observable.average(y)[0] == pytest.approx(2.0)

    def test_weighting(self) -> None:
        """Test that g(y) = exp(−|y|²/2) multiplies both Ψ and Ψ̄."""
        observable = Observable("y_only", weighted=True)
        y = np.array([[1.0]])

        assert observable.average(y)[0] == pytest.approx(math.cos(1.0) * math.exp(-0.5))

    def test_y_only_oscillation_vanishes(self) -> None:
        """Test that an observable without fast dependence has zero oscillation."""
        functional = Observable("y_only").oscillation(0.1)

        values = functional(np.array([[0.3], [1.7]]))

        np.testing.assert_allclose(values, 0.0, atol=1e-15)

    @pytest.mark.slow
    def test_ergodic_average_improves_with_epsilon(self, sine1d_medium) -> None:
        """Test that the sup-error of ∫ sin(X/ε) drops along the ε ladder."""
        engine = SimulationEngine(threads=1, block_size=256)
        config = SimConfig(
            horizon=0.5,
            paths=200,
            seed=2,
            initial=InitialCondition("point", (0.0,)),
            save_count=10,
        )

        report = ergodic_average_check(
            engine, sine1d_medium, [0.5, 0.25, 0.125], Observable("sin_x1"), config
        )

        errors = [entry.metrics["sup_error"] for entry in report.entries]
        assert errors[0] > errors[-1]
        assert report.passed


@pytest.mark.unit
class TestInvariantMeasure:
    """Test invariant_measure_check."""

    def test_point_start_is_rejected(self) -> None:
        """Test that the check needs a density initial law."""
        ensemble = _ensemble(np.zeros((10, 1)))

        with pytest.raises(ValidationError, match="density"):
            invariant_measure_check(ensemble, build_potential("gaussian", 1))

    def test_ornstein_uhlenbeck_keeps_its_law(self, unit_medium) -> None:
        """Test that dX = −X dt + dB started at N(0, ½) stays there."""
        # Arrange
        engine = SimulationEngine(threads=1, block_size=1024)
        config = SimConfig(
            epsilon=1.0,
            horizon=1.0,
            base_step=0.01,
            paths=2000,
            seed=8,
            initial=InitialCondition("density"),
            save_count=1,
        )
        ensemble = engine.simulate_xeps(config, unit_medium)

        # Act
        report = invariant_measure_check(ensemble, unit_medium.potential)

        # Assert
        assert report.passed
        assert len(report.entries) == 2
        assert "second_gap_1" in report.entries[-1].metrics


@pytest.mark.unit
class TestRegularitySuite:
    """Test regularity_suite."""

    def test_separable_medium_is_regular(
        self, corrector_factory, separable_medium
    ) -> None:
        """Test energy flatness, Lipschitz stability and viscosity decay."""
        service = corrector_factory(2, 8)

        report = regularity_suite(
            service,
            separable_medium,
            [0.7, 0.0],
            [1e-2, 1e-3, 1e-4],
            [10.0, 100.0, 1000.0],
            h_steps=(1e-2, 1e-3),
        )

        names = {check.check_name for check in report.checks}
        assert {"energy_u", "energy_w", "w_equals_u", "viscosity_decay"} <= names
        assert report.passed, [c.detail for c in report.checks if not c.passed]
        assert len(report.values("energy", "u")) == 3
        assert report.to_rows()[0] == ["quantity", "corrector", "lambda", "h", "value"]

    def test_every_corrector_gets_lipschitz_ratios(
        self, corrector_factory, separable_medium
    ) -> None:
        """Test that u, ∂_y u and w get a ratio per (λ, h) and a check per λ."""
        # Arrange
        service = corrector_factory(2, 8)
        lambdas = [1e-2, 1e-3, 1e-4]

        # Act
        report = regularity_suite(
            service, separable_medium, [0.7, 0.0], lambdas, [10.0, 100.0, 1000.0]
        )

        # Assert
        for corrector in ("u", "dy_u", "w"):
            assert len(report.values("lipschitz", corrector)) == 6
            for lam in lambdas:
                check = next(
                    c
                    for c in report.checks
                    if c.check_name == f"lipschitz_{corrector}_lambda={lam:g}"
                )
                assert check.passed, check.detail
        assert min(report.values("lipschitz", "w")) > 0.0

    def test_w_ratios_differ_from_u_when_h_is_present(self, corrector_factory) -> None:
        """Test that the w_λ ratios come from the symmetric operator."""
        medium = build_medium("separable", {"dim": 2, "h_amplitude": 0.5})

        report = regularity_suite(
            corrector_factory(2, 8),
            medium,
            [0.3, 0.0],
            [1e-2, 1e-3, 1e-4],
            [10.0, 100.0, 1000.0],
        )

        assert report.values("lipschitz", "w") != report.values("lipschitz", "u")
        assert "w_equals_u" not in {c.check_name for c in report.checks}

    def test_y_independent_medium_has_zero_ratios(
        self, corrector_factory, sine1d_medium
    ) -> None:
        """Test that every Lipschitz ratio vanishes when nothing depends on y."""
        report = regularity_suite(
            corrector_factory(1, 16),
            sine1d_medium,
            [0.4],
            [1e-2, 1e-3, 1e-4],
            [10.0, 100.0, 1000.0],
        )

        for corrector in ("u", "dy_u", "w"):
            values = report.values("lipschitz", corrector)
            assert values == [0.0] * 6
        lipschitz = [c for c in report.checks if c.check_name.startswith("lipschitz")]
        assert len(lipschitz) == 9
        assert all(check.passed for check in lipschitz)


@pytest.mark.unit
class TestGeneratorResidual:
    """Test generator_residual on the one-dimensional medium."""

    DTS = [1e-1, 1e-2, 1e-3]

    def test_inviscid_residual_has_euler_order(self, sine1d_medium) -> None:
        """Test that the residual shrinks with dt for n = ∞."""
        report = generator_residual(sine1d_medium, [0.3], self.DTS)

        residuals = [entry.metrics["residual"] for entry in report.entries]
        assert report.passed
        assert residuals[-1] < residuals[0]

    def test_generator_noise_matches_generator(self, sine1d_medium) -> None:
        """Test that the n^{-1/2} noise convention is consistent."""
        report = generator_residual(
            sine1d_medium, [0.3], self.DTS, viscosity=10.0, viscous_noise="generator"
        )

        assert report.passed

    def test_display_noise_leaves_a_floor(self, sine1d_medium) -> None:
        """Test that the (n/2)^{-1/2} convention misses the generator."""
        report = generator_residual(
            sine1d_medium, [0.3], self.DTS, viscosity=10.0, viscous_noise="display"
        )

        assert not report.passed
        assert report.entries[-1].metrics["residual"] > 1e-2

    def test_monte_carlo_rate_is_reported(self, engine, sine1d_medium) -> None:
        """Test that an engine adds Monte Carlo rates with errors."""
        report = generator_residual(
            sine1d_medium, [0.3], self.DTS, engine=engine, samples=200, seed=1
        )

        assert "mc_rate" in report.entries[0].metrics
        assert report.entries[0].errors["mc_rate"] > 0.0


@pytest.mark.unit
class TestConvergenceReport:
    """Test report rendering."""

    @pytest.fixture
    def report(self) -> ConvergenceReport:
        return ConvergenceReport(
            ladder="epsilon",
            entries=[
                LadderEntry(0.5, {"energy_distance": 0.2}, {"energy_distance": 0.01}),
                LadderEntry(0.25, {"energy_distance": 0.05}),
            ],
            checks=[CheckResult("energy_distance_trend", 0.0, True, "ok")],
        )

    def test_render_table(self, report) -> None:
        """Test that the table lists entries and verdicts."""
        table = report.render_table()

        assert "energy_distance" in table.splitlines()[0]
        assert "0.2±0.01" in table
        assert "[PASS] energy_distance_trend: ok" in table

    def test_to_rows(self, report) -> None:
        """Test the CSV row layout."""
        header, rows = report.to_rows()

        assert header == ["epsilon", "metric", "value", "se"]
        assert rows[1] == [0.25, "energy_distance", 0.05, ""]

    def test_to_json(self, report) -> None:
        """Test the JSON layout."""
        data = report.to_json()

        assert data["pass"] is True
        assert data["entries"][0]["errors"] == {"energy_distance": 0.01}

"""Unit tests for the Effective Service.

Tests cover:
- Macro grid construction and validation
- Ā against the one-dimensional harmonic mean
- Tabulation of the degenerate sec4 medium (kernel, ellipticity, B̄)
- B̄ finite differences, interpolation and serialization
- Variational Ã and the sandwich bounds
"""

import numpy as np
import pytest

from homog_lab.core.corrector_service import CorrectorService
from homog_lab.core.effective_service import (
    EffectiveService,
    EffectiveTensors,
    GeometryViolationError,
    YGrid,
    effective_b_bar,
    kernel_and_geometry,
)
from homog_lab.core.galerkin import GalerkinBasis
from homog_lab.medium.potentials import build_potential
from homog_lab.medium.presets import build_medium
from homog_lab.utils.validators import ValidationError

SQRT3 = np.sqrt(3.0)
FINE_LADDER = [1e-1, 1e-2, 1e-3, 1e-4]
COARSE_LADDER = [1e-1, 1e-2, 1e-3]


def _constant_tensors(grid: YGrid, a: np.ndarray) -> EffectiveTensors:
    d = grid.dim
    return EffectiveTensors(
        y_grid=grid,
        a_bar=np.broadcast_to(a, (grid.size, d, d)).copy(),
        h_bar=np.zeros((grid.size, d, d)),
        b_bar=np.zeros((grid.size, d)),
        boundary=grid.boundary_mask(),
        kernel_basis=np.zeros((d, 0)),
        ellipticity=(0.0, 0.0),
    )


@pytest.mark.unit
class TestYGrid:
    """Test the macro grid."""

    def test_cube_grid_nodes_and_boundary(self) -> None:
        """Test that a 3×3 grid has 9 nodes, 8 of them on the boundary."""
        grid = YGrid.cube(2, 1.0, 3)

        assert grid.nodes().shape == (9, 2)
        assert int(grid.boundary_mask().sum()) == 8
        assert not grid.boundary_mask()[4]
        assert grid.steps == (1.0, 1.0)

    def test_contains(self) -> None:
        """Test the inside-domain mask."""
        grid = YGrid.cube(1, 2.0, 5)

        inside = grid.contains(np.array([[0.0], [2.0], [2.5]]))

        assert inside.tolist() == [True, True, False]

    @pytest.mark.parametrize(
        "lower,upper,points",
        [
            ((-1.0,), (1.0,), (2,)),
            ((1.0,), (1.0,), (5,)),
            ((-1.0, -1.0), (1.0,), (5, 5)),
        ],
    )
    def test_invalid_grid_raises(self, lower, upper, points) -> None:
        """Test that degenerate grids are rejected."""
        with pytest.raises(ValidationError):
            YGrid(lower=lower, upper=upper, points=points)


@pytest.mark.unit
class TestEffectiveServiceInitialization:
    """Test EffectiveService initialization."""

    def test_init_with_none_service_raises_error(self) -> None:
        """Test that initialization fails with None corrector service."""
        with pytest.raises(ValueError) as exc_info:
            EffectiveService(None)  # type: ignore[arg-type]

        assert "corrector_service cannot be None" in str(exc_info.value)

    def test_threads_floor_at_one(self) -> None:
        """Test that a non-positive thread count falls back to one."""
        service = EffectiveService(CorrectorService(GalerkinBasis(1, 4)), threads=0)

        assert service.threads == 1


@pytest.mark.unit
class TestEffectiveTensorsAtPoint:
    """Test Ā and H̄ at single macro points."""

    def test_sine1d_harmonic_mean(self, sine1d_medium) -> None:
        """Test that Ā = √3, the harmonic mean of 2 + sin x."""
        # Arrange
        service = EffectiveService(CorrectorService(GalerkinBasis(1, 16)))

        # Act
        a_bar = service.effective_a_bar(sine1d_medium, [0.0], FINE_LADDER)

        # Assert
        assert a_bar.shape == (1, 1)
        assert a_bar[0, 0] == pytest.approx(SQRT3, abs=1e-6)

    def test_effective_h_vanishes_without_h(self, sine1d_medium) -> None:
        """Test that H̄ = 0 for media without an antisymmetric part."""
        service = EffectiveService(CorrectorService(GalerkinBasis(1, 8)))

        h_bar = service.effective_h_bar(sine1d_medium, [0.0], COARSE_LADDER)

        np.testing.assert_array_equal(h_bar, np.zeros((1, 1)))

    def test_effective_h_is_antisymmetric(self) -> None:
        """Test that H̄ is antisymmetric and nonzero when H is switched on."""
        medium = build_medium("separable", {"dim": 2, "h_amplitude": 0.3})
        service = EffectiveService(CorrectorService(GalerkinBasis(2, 4)))

        h_bar = service.effective_h_bar(medium, [0.2, 0.0], COARSE_LADDER)

        np.testing.assert_array_equal(h_bar, -h_bar.T)
        assert abs(h_bar[0, 1]) > 1e-3

    def test_sec4_point_equals_reference(
        self, sec4_effective_service, sec4_medium, sec4_reference
    ) -> None:
        """Test that Ā = ã when the corrector vanishes."""
        a_bar, h_bar, raw_a, _ = sec4_effective_service.effective_tensors_at(
            sec4_medium, [0.5, -0.5], COARSE_LADDER
        )

        np.testing.assert_allclose(a_bar, sec4_reference, atol=1e-12)
        np.testing.assert_allclose(h_bar, 0.0, atol=1e-14)
        np.testing.assert_allclose(raw_a, raw_a.T, atol=1e-12)


@pytest.mark.unit
class TestTabulate:
    """Test grid tabulation on the degenerate sec4 medium."""

    @pytest.fixture
    def sec4_tensors(self, sec4_effective_service, sec4_medium) -> EffectiveTensors:
        grid = YGrid.cube(2, 1.0, 3)
        return sec4_effective_service.tabulate(
            sec4_medium, grid, COARSE_LADDER, metadata={"config_hash": "abc"}
        )

    def test_a_bar_equals_reference_everywhere(
        self, sec4_tensors, sec4_reference
    ) -> None:
        """Test that Ā is the constant rank-one reference on every node."""
        np.testing.assert_allclose(
            sec4_tensors.a_bar, np.broadcast_to(sec4_reference, (9, 2, 2)), atol=1e-12
        )

    def test_kernel_and_ellipticity(self, sec4_tensors) -> None:
        """Test that K = span{(2, −1)/√5} and Ā = 6.25 on K^⊥."""
        expected = np.array([2.0, -1.0]) / np.sqrt(5.0)

        kernel = sec4_tensors.kernel_basis

        assert kernel.shape == (2, 1)
        assert abs(float(kernel[:, 0] @ expected)) == pytest.approx(1.0, abs=1e-10)
        assert sec4_tensors.ellipticity[0] == pytest.approx(6.25, abs=1e-10)
        assert sec4_tensors.ellipticity[1] == pytest.approx(6.25, abs=1e-10)

    def test_b_bar_is_linear_drift(self, sec4_tensors, sec4_reference) -> None:
        """Test that B̄ = −Āy for y-independent Ā and V = |y|²/2."""
        nodes = sec4_tensors.y_grid.nodes()

        np.testing.assert_allclose(
            sec4_tensors.b_bar, -nodes @ sec4_reference, atol=1e-12
        )

    def test_geometry_passes(self, sec4_tensors) -> None:
        """Test that the kernel geometry report passes."""
        report = kernel_and_geometry(sec4_tensors)

        assert report.passed
        assert report.kernel_dim == 1
        assert report.to_json()["pass"] is True

    def test_metadata_is_recorded(self, sec4_tensors) -> None:
        """Test that provenance lands in the metadata."""
        assert sec4_tensors.metadata["config_hash"] == "abc"
        assert sec4_tensors.metadata["preset_id"] == "sec4"
        assert sec4_tensors.metadata["lambda_ladder"] == COARSE_LADDER

    def test_json_round_trip(self, sec4_tensors) -> None:
        """Test that to_json/from_json preserves the tables."""
        restored = EffectiveTensors.from_json(sec4_tensors.to_json())

        np.testing.assert_array_equal(restored.a_bar, sec4_tensors.a_bar)
        np.testing.assert_array_equal(restored.b_bar, sec4_tensors.b_bar)
        np.testing.assert_array_equal(restored.kernel_basis, sec4_tensors.kernel_basis)
        assert restored.y_grid == sec4_tensors.y_grid

    def test_grid_dimension_mismatch_raises(
        self, sec4_effective_service, sec4_medium
    ) -> None:
        """Test that a 1D grid is rejected for a 2D medium."""
        with pytest.raises(ValidationError, match="does not match"):
            sec4_effective_service.tabulate(
                sec4_medium, YGrid.cube(1, 1.0, 3), COARSE_LADDER
            )

    def test_thread_count_does_not_change_tables(self, separable_medium) -> None:
        """Test that 1 and 3 worker threads give identical tables."""
        grid = YGrid.cube(2, 1.0, 3)
        serial = EffectiveService(CorrectorService(GalerkinBasis(2, 4)), threads=1)
        pooled = EffectiveService(CorrectorService(GalerkinBasis(2, 4)), threads=3)

        first = serial.tabulate(separable_medium, grid, COARSE_LADDER)
        second = pooled.tabulate(separable_medium, grid, COARSE_LADDER)

        np.testing.assert_array_equal(first.a_bar, second.a_bar)
        np.testing.assert_array_equal(first.b_bar, second.b_bar)


@pytest.mark.unit
class TestEffectiveB:
    """Test the finite-difference drift."""

    def test_quadratic_a_bar(self) -> None:
        """Test B̄ = ½(y²)′ − y·y² = y − y³ for Ā = y² and V = y²/2."""
        # Arrange
        grid = YGrid((-1.0,), (1.0,), (9,))
        y = grid.nodes()[:, 0]
        a_bar = (y**2)[:, None, None]

        # Act
        b_bar, boundary = effective_b_bar(
            grid, a_bar, np.zeros_like(a_bar), build_potential("gaussian", 1)
        )

        # Assert
        np.testing.assert_allclose(b_bar[:, 0], y - y**3, atol=1e-12)
        assert boundary.tolist() == [True] + [False] * 7 + [True]


@pytest.mark.unit
class TestGeometryAndInterpolation:
    """Test kernel geometry failures and the tensor interpolator."""

    def test_varying_kernel_dimension_raises(self) -> None:
        """Test that a kernel appearing at one node raises."""
        grid = YGrid.cube(2, 1.0, 3)
        tensors = _constant_tensors(grid, np.eye(2))
        tensors.a_bar[4] = np.diag([1.0, 0.0])

        with pytest.raises(GeometryViolationError) as exc_info:
            kernel_and_geometry(tensors)

        assert "varies" in str(exc_info.value)

    def test_full_rank_tensors_have_empty_kernel(self) -> None:
        """Test that Ā = 2·Id gives kernel_dim 0 and ellipticity (2, 2)."""
        tensors = _constant_tensors(YGrid.cube(2, 1.0, 3), 2.0 * np.eye(2))

        report = kernel_and_geometry(tensors)

        assert report.kernel_dim == 0
        assert report.alpha_min == pytest.approx(2.0)
        assert report.passed

    def test_interpolator_reproduces_constants(self, sec4_reference) -> None:
        """Test that constant tables interpolate exactly, with a domain mask."""
        grid = YGrid.cube(2, 1.0, 5)
        interpolate = _constant_tensors(grid, sec4_reference).interpolator()

        a, b, inside = interpolate(np.array([[0.13, -0.71], [3.0, 0.0]]))

        np.testing.assert_allclose(a[0], sec4_reference, atol=1e-12)
        np.testing.assert_allclose(b, 0.0, atol=1e-14)
        assert inside.tolist() == [True, False]


@pytest.mark.unit
class TestVariationalReference:
    """Test the variational Ã and the sandwich bounds."""

    def test_sec4_variational_equals_reference(
        self, sec4_effective_service, sec4_medium, sec4_reference
    ) -> None:
        """Test that Ã = σ̃σ̃* when σ̃ does not depend on x."""
        result = sec4_effective_service.variational_a_tilde(sec4_medium)

        np.testing.assert_allclose(result.a_tilde, sec4_reference, atol=1e-10)
        assert len(result.directions) == 4
        assert max(result.minimizer_norms) < 1e-8

    def test_sine1d_variational_is_harmonic_mean(self, sine1d_medium) -> None:
        """Test that inf M[a(φ′ + 1)²] = √3 for a = 2 + sin x."""
        service = EffectiveService(CorrectorService(GalerkinBasis(1, 16)))

        result = service.variational_a_tilde(sine1d_medium)

        assert result.a_tilde[0, 0] == pytest.approx(SQRT3, abs=1e-8)
        assert result.to_json()["A_tilde"] == result.a_tilde.tolist()

    def test_sandwich_holds_for_sec4(self, sec4_medium, sec4_reference) -> None:
        """Test that Ā = Ã satisfies the two-sided bound."""
        tensors = _constant_tensors(YGrid.cube(2, 1.0, 3), sec4_reference)
        service = EffectiveService(CorrectorService(GalerkinBasis(2, 4)))

        check = service.sandwich_check(sec4_medium, tensors, sec4_reference, seed=3)

        assert check.passed
        assert check.check_name == "sandwich"

    def test_sandwich_detects_lower_violation(
        self, sec4_medium, sec4_reference
    ) -> None:
        """Test that an oversized Ã violates the lower bound."""
        tensors = _constant_tensors(YGrid.cube(2, 1.0, 3), sec4_reference)
        service = EffectiveService(CorrectorService(GalerkinBasis(2, 4)))

        check = service.sandwich_check(
            sec4_medium, tensors, 4.0 * sec4_reference, seed=3
        )

        assert not check.passed
        assert check.margin > 0.0

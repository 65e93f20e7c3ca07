"""Unit tests for the Corrector Service.

Tests cover:
- Service initialization
- Resolvent problem validation
- Closed-form single-mode solutions (plain and viscous)
- λ → 0 extrapolation against the one-dimensional corrector
- y-derivatives and vanishing-viscosity consistency
- Error paths (resolution, residual, non-monotone ladders)
"""

from dataclasses import replace

import numpy as np
import pytest

from homog_lab.core.corrector_service import (
    CorrectorService,
    DriftRhs,
    ExtrapolationError,
    ModeRhs,
    OperatorKind,
    ResolutionError,
    ResolventProblem,
    SingularSystemError,
    ViscosityConsistency,
)
from homog_lab.core.galerkin import GalerkinBasis
from homog_lab.medium.presets import build_medium
from homog_lab.utils.validators import ValidationError

SQRT3 = np.sqrt(3.0)


@pytest.mark.unit
class TestCorrectorServiceInitialization:
    """Test CorrectorService initialization."""

    def test_init_with_basis(self) -> None:
        """Test that the service keeps its basis and tolerances."""
        # Arrange
        basis = GalerkinBasis(1, 4)

        # Act
        service = CorrectorService(basis, residual_tolerance=1e-9)

        # Assert
        assert service.basis is basis
        assert service.residual_tolerance == 1e-9

    def test_init_with_none_basis_raises_error(self) -> None:
        """Test that initialization fails with None basis."""
        with pytest.raises(ValueError) as exc_info:
            CorrectorService(None)  # type: ignore[arg-type]

        assert "basis cannot be None" in str(exc_info.value)


@pytest.mark.unit
class TestResolventProblem:
    """Test ResolventProblem validation."""

    def test_nonpositive_lambda_raises(self, sine1d_medium) -> None:
        """Test that λ ≤ 0 is rejected."""
        with pytest.raises(ValidationError, match="lambda must be positive"):
            ResolventProblem.at(sine1d_medium, [0.0], 0.0)

    def test_viscous_kind_needs_viscosity(self, sine1d_medium) -> None:
        """Test that viscous operators require n ≥ 1."""
        with pytest.raises(ValidationError, match="viscosity"):
            ResolventProblem.at(
                sine1d_medium, [0.0], 0.1, OperatorKind.L_VISCOUS, viscosity=0.5
            )

    def test_drift_index_out_of_range(self, sine1d_medium) -> None:
        """Test that b_i with i ≥ d is rejected."""
        with pytest.raises(ValidationError, match="out of range"):
            ResolventProblem.at(sine1d_medium, [0.0], 0.1, rhs=DriftRhs(1))

    def test_wrong_y_dimension(self, sec4_medium) -> None:
        """Test that y must have d components."""
        with pytest.raises(ValidationError):
            ResolventProblem.at(sec4_medium, [0.0], 0.1)

    def test_mode_rhs_validation(self) -> None:
        """Test that ModeRhs rejects zero wavevectors and unknown kinds."""
        with pytest.raises(ValidationError):
            ModeRhs((0,), "cos")
        with pytest.raises(ValidationError):
            ModeRhs((1,), "tan")

    def test_operator_kind_helpers(self) -> None:
        """Test the viscous/symmetric switches of OperatorKind."""
        assert OperatorKind.S.with_viscosity() is OperatorKind.S_VISCOUS
        assert OperatorKind.L_VISCOUS.without_viscosity() is OperatorKind.L
        assert OperatorKind.S_VISCOUS.symmetric
        assert not OperatorKind.L.viscous


@pytest.mark.unit
class TestSolveResolvent:
    """Test single solves against closed forms."""

    def test_single_mode_closed_form(self, unit_medium) -> None:
        """Test λu − ½u″ = cos x at λ = 1 gives u = (2/3)cos x."""
        # Arrange
        service = CorrectorService(GalerkinBasis(1, 2))
        problem = ResolventProblem.at(
            unit_medium, [0.0], 1.0, rhs=ModeRhs((1,), "cos")
        )

        # Act
        solution = service.solve_resolvent(problem)

        # Assert
        expected = np.zeros(service.basis.size)
        expected[service.basis.labels().index("cos(1)")] = 2.0 / 3.0
        np.testing.assert_allclose(solution.coefficients, expected, atol=1e-14)
        assert solution.residual < 1e-12
        assert solution.energy_identity_gap < 1e-12

    def test_viscous_single_mode_closed_form(self, unit_medium) -> None:
        """Test that viscosity n adds |k|²/(2n): coefficient 2/(3 + 1/n)."""
        service = CorrectorService(GalerkinBasis(1, 2))
        n = 4.0
        problem = ResolventProblem.at(
            unit_medium,
            [0.0],
            1.0,
            OperatorKind.L_VISCOUS,
            ModeRhs((1,), "cos"),
            viscosity=n,
        )

        solution = service.solve_resolvent(problem)

        index = service.basis.labels().index("cos(1)")
        assert solution.coefficients[index] == pytest.approx(2.0 / (3.0 + 1.0 / n))

    def test_energy_identity_for_drift_rhs(self, sine1d_medium) -> None:
        """Test λ|u|² + B(u, u) = (b, u) for the drift corrector."""
        service = CorrectorService(GalerkinBasis(1, 16))
        problem = ResolventProblem.at(sine1d_medium, [0.0], 1e-2)

        solution = service.solve_resolvent(problem)

        assert solution.energy_identity_gap < 1e-10
        assert solution.energy_bound > 0.0
        assert solution.to_json()["operator_kind"] == "L"

    def test_constant_medium_has_zero_corrector(self, sec4_medium) -> None:
        """Test that b = 0 gives u = 0 without tripping the residual check."""
        service = CorrectorService(GalerkinBasis(2, 4))
        problem = ResolventProblem.at(sec4_medium, [0.0, 0.0], 0.1)

        solution = service.solve_resolvent(problem)

        np.testing.assert_allclose(solution.coefficients, 0.0)

    def test_symmetric_solve_differs_only_with_h(self) -> None:
        """Test that w = u without H and w ≠ u with H for a non-separable load."""
        load = ModeRhs((1, 1), "cos")
        service = CorrectorService(GalerkinBasis(2, 4))
        plain = build_medium("separable", {"dim": 2})
        rotated = build_medium("separable", {"dim": 2, "h_amplitude": 0.5})

        plain_problem = ResolventProblem.at(plain, [0.3, 0.0], 0.1, rhs=load)
        rotated_problem = ResolventProblem.at(rotated, [0.3, 0.0], 0.1, rhs=load)

        assert np.array_equal(
            service.solve_resolvent(plain_problem).coefficients,
            service.solve_symmetric(plain_problem).coefficients,
        )
        gap = np.abs(
            service.solve_resolvent(rotated_problem).coefficients
            - service.solve_symmetric(rotated_problem).coefficients
        ).max()
        assert gap > 1e-6


@pytest.mark.unit
class TestCorrectorErrors:
    """Test failure modes of the corrector solver."""

    def test_unresolved_medium_raises(self, sine1d_medium) -> None:
        """Test that K_gal < K_med + 2 raises ResolutionError."""
        service = CorrectorService(GalerkinBasis(1, 2))

        with pytest.raises(ResolutionError) as exc_info:
            service.solve_resolvent(ResolventProblem.at(sine1d_medium, [0.0], 0.1))

        assert "need >= 3" in str(exc_info.value)

    def test_dimension_mismatch_raises(self, sec4_medium) -> None:
        """Test that a basis of the wrong dimension is rejected."""
        service = CorrectorService(GalerkinBasis(1, 4))

        with pytest.raises(ValidationError):
            service.assemble(ResolventProblem.at(sec4_medium, [0.0, 0.0], 0.1))

    def test_residual_above_tolerance_raises(self, unit_medium) -> None:
        """Test that a failed residual check raises SingularSystemError."""
        service = CorrectorService(GalerkinBasis(1, 2), residual_tolerance=-1.0)
        problem = ResolventProblem.at(
            unit_medium, [0.0], 0.5, rhs=ModeRhs((1,), "sin")
        )

        with pytest.raises(SingularSystemError) as exc_info:
            service.solve_resolvent(problem)

        assert exc_info.value.lam == 0.5
        assert "condition" in str(exc_info.value)

    def test_non_monotone_ladder_raises(self, sine1d_medium) -> None:
        """Test that an increasing λ|u|² sequence raises ExtrapolationError."""
        # Arrange: rebuild a genuine ladder with a corrupted energy sequence
        service = CorrectorService(GalerkinBasis(1, 8))
        problem = ResolventProblem.at(sine1d_medium, [0.0], 1e-1)
        result = service.extrapolate_corrector(problem, [1e-1, 1e-2, 1e-3])
        corrupted = [
            replace(solution, lambda_energy=energy)
            for solution, energy in zip(result.solutions, [1.0, 2.0, 3.0])
        ]

        # Act & Assert
        with pytest.raises(ExtrapolationError):
            service._extrapolate(result.lambdas, corrupted)

    def test_ladder_ratio_is_enforced(self, sine1d_medium) -> None:
        """Test that λ steps must shrink by at least a factor 4."""
        service = CorrectorService(GalerkinBasis(1, 8))
        problem = ResolventProblem.at(sine1d_medium, [0.0], 1e-1)

        with pytest.raises(ValidationError, match="shrink"):
            service.extrapolate_corrector(problem, [1e-1, 5e-2, 1e-2])


@pytest.mark.unit
class TestExtrapolation:
    """Test the λ → 0 extrapolation."""

    def test_sine1d_corrector_gradient(self, sine1d_medium) -> None:
        """Test that Du → √3/a − 1 for a = 2 + sin x."""
        # Arrange
        service = CorrectorService(GalerkinBasis(1, 16))
        problem = ResolventProblem.at(sine1d_medium, [0.0], 1e-1)
        x = service.basis.nodes

        # Act
        result = service.extrapolate_corrector(problem, [1e-1, 1e-2, 1e-3, 1e-4])

        # Assert
        exact = SQRT3 / (2.0 + np.sin(x[:, 0])) - 1.0
        np.testing.assert_allclose(result.gradient()[:, 0], exact, atol=1e-6)
        assert result.lambda_decay == sorted(result.lambda_decay, reverse=True)

    def test_sine1d_directional_gradient(self, sine1d_medium) -> None:
        """Test that σ̃*Du → √a (√3/a − 1) on nodes and at given points."""
        service = CorrectorService(GalerkinBasis(1, 16))
        problem = ResolventProblem.at(sine1d_medium, [0.0], 1e-1)
        result = service.extrapolate_corrector(problem, [1e-1, 1e-2, 1e-3, 1e-4])
        points = np.array([[0.0], [np.pi / 2.0], [4.0]])

        on_nodes = result.directional_gradient(sine1d_medium)
        at_points = result.directional_gradient(sine1d_medium, points)

        a = 2.0 + np.sin(service.basis.nodes[:, 0])
        np.testing.assert_allclose(
            on_nodes[:, 0], np.sqrt(a) * (SQRT3 / a - 1.0), atol=2e-6
        )
        a = 2.0 + np.sin(points[:, 0])
        np.testing.assert_allclose(
            at_points[:, 0], np.sqrt(a) * (SQRT3 / a - 1.0), atol=2e-6
        )

    def test_family_shares_one_factorization(self, sec4_medium) -> None:
        """Test that the family returns one extrapolation per drift component."""
        service = CorrectorService(GalerkinBasis(2, 4))

        family = service.extrapolate_family(sec4_medium, [0.5, 0.5], [1e-1, 1e-2, 1e-3])

        assert len(family) == 2
        for result in family:
            np.testing.assert_allclose(result.limit_coefficients, 0.0)
            assert result.solutions[0].rhs_kind.startswith("b_")


@pytest.mark.unit
class TestYDerivativesAndViscosity:
    """Test y-derivatives and vanishing-viscosity consistency."""

    def test_y_independent_medium_has_zero_derivatives(self, sine1d_medium) -> None:
        """Test that a medium without y dependence has ∂_y u = 0."""
        service = CorrectorService(GalerkinBasis(1, 8))
        problem = ResolventProblem.at(sine1d_medium, [0.4], 1e-2)

        results = service.corrector_y_derivatives(problem, 1e-3)

        assert len(results) == 1
        np.testing.assert_allclose(results[0].first, 0.0, atol=1e-12)
        assert results[0].increment_h1_norm == pytest.approx(0.0, abs=1e-12)

    def test_separable_derivative_is_nonzero(self, separable_medium) -> None:
        """Test that q(y) enters the corrector through λ/q(y)."""
        service = CorrectorService(GalerkinBasis(2, 4))
        problem = ResolventProblem.at(separable_medium, [0.7, 0.0], 1e-1)

        first, second = service.corrector_y_derivatives(problem, 1e-3)

        assert first.first_h1_norm > 1e-6
        assert second.first_h1_norm == pytest.approx(0.0, abs=1e-9)

    def test_step_outside_range_raises(self, sine1d_medium) -> None:
        """Test that h outside [1e-6, 1e-2] is rejected."""
        service = CorrectorService(GalerkinBasis(1, 8))
        problem = ResolventProblem.at(sine1d_medium, [0.0], 1e-2)

        with pytest.raises(ValidationError, match="h_step"):
            service.corrector_y_derivatives(problem, 0.1)

    def test_viscosity_ladder_decreases(self, sine1d_medium) -> None:
        """Test that ‖u^{(n)} − u‖₁ and n⁻¹|Du^{(n)}|² drop as n grows."""
        service = CorrectorService(GalerkinBasis(1, 8))
        problem = ResolventProblem.at(sine1d_medium, [0.0], 1e-2)

        consistency = service.viscosity_consistency(problem, [10.0, 100.0, 1000.0])

        assert consistency.decreasing()
        assert consistency.difference_norms[-1] < consistency.difference_norms[0]
        assert consistency.to_json()["decreasing"] is True

    @pytest.mark.parametrize(
        "differences,dissipation,expected",
        [
            ([0.3, 0.1, 0.01], [0.2, 0.05, 0.01], True),
            ([0.3, 0.4, 0.01], [0.2, 0.05, 0.01], False),
            ([0.3, 0.1, 0.01], [0.2, 0.01, 0.05], False),
            ([0.0, 0.0, 0.0], [0.0, 0.0, 0.0], True),
            ([0.1, 0.1, 0.1], [0.2, 0.05, 0.01], False),
        ],
        ids=["monotone", "bump", "late-rise", "zero", "flat"],
    )
    def test_decreasing_checks_every_step(
        self, differences, dissipation, expected
    ) -> None:
        """Test that a rise anywhere along the n ladder is reported."""
        consistency = ViscosityConsistency(
            viscosities=[10.0, 100.0, 1000.0],
            difference_norms=differences,
            dissipation=dissipation,
        )

        assert consistency.decreasing() is expected

"""Unit tests for pointwise coefficient and drift evaluation."""

import numpy as np
import pytest

from homog_lab.medium.evaluation import (
    eval_coeffs,
    eval_drifts,
    reduce_fast,
    sample_grid,
)
from homog_lab.utils.validators import ValidationError


@pytest.mark.unit
class TestEvalCoeffs:
    """Test eval_coeffs."""

    def test_sine1d_value_at_quarter_period(self, sine1d_medium) -> None:
        """Test that a(π/2) = 3 for a = 2 + sin x."""
        sample = eval_coeffs(sine1d_medium, [np.pi / 2], [0.0])

        assert sample.a.shape == (1, 1)
        assert sample.a[0, 0] == pytest.approx(3.0)
        assert sample.a_tilde[0, 0] == pytest.approx(3.0)

    def test_fast_variable_is_periodic(self, sine1d_medium) -> None:
        """Test that x and x + 2π give identical coefficients."""
        first = eval_coeffs(sine1d_medium, [0.7], [0.2])
        shifted = eval_coeffs(sine1d_medium, [0.7 + 2 * np.pi], [0.2])

        np.testing.assert_allclose(first.a, shifted.a, rtol=1e-14)

    def test_batched_inputs_give_batched_output(self, sec4_medium) -> None:
        """Test that (N, d) inputs produce (N, d, d) tensors."""
        x = np.zeros((4, 2))
        y = np.ones((4, 2))

        sample = eval_coeffs(sec4_medium, x, y)

        assert sample.a.shape == (4, 2, 2)
        assert sample.grad_potential.shape == (4, 2)

    def test_sec4_diffusion_equals_reference(
        self, sec4_medium, sec4_reference
    ) -> None:
        """Test that a = σ̃σ̃* for the unmodulated sec4 medium."""
        sample = eval_coeffs(sec4_medium, [1.0, 2.0], [0.5, -0.5])

        np.testing.assert_allclose(sample.a, sec4_reference, atol=1e-14)
        np.testing.assert_allclose(sample.h, 0.0)

    def test_non_finite_point_raises(self, sec4_medium) -> None:
        """Test that NaN inputs are rejected."""
        with pytest.raises(ValidationError) as exc_info:
            eval_coeffs(sec4_medium, [np.nan, 0.0], [0.0, 0.0])

        assert "non-finite" in str(exc_info.value)

    def test_wrong_dimension_raises(self, sec4_medium) -> None:
        """Test that a point of the wrong dimension is rejected."""
        with pytest.raises(ValidationError, match="must have shape"):
            eval_coeffs(sec4_medium, [0.0, 0.0, 0.0], [0.0, 0.0, 0.0])


@pytest.mark.unit
class TestEvalDrifts:
    """Test eval_drifts."""

    def test_sine1d_drifts(self, sine1d_medium) -> None:
        """Test b = ½a′(x) and c = −∂V·a for a = 2 + sin x."""
        # Arrange: at x = 0, a = 2 and a' = 1; ∂V(y) = y for v = 1/2
        y = 0.5

        # Act
        drifts = eval_drifts(sine1d_medium, [0.0], [y])

        # Assert
        assert drifts.b[0] == pytest.approx(0.5)
        assert drifts.c[0] == pytest.approx(-y * 2.0)

    def test_sec4_fast_drift_vanishes(self, sec4_medium, sec4_reference) -> None:
        """Test that b = 0 and c = −ã y when nothing depends on x."""
        y = np.array([0.3, -0.4])

        drifts = eval_drifts(sec4_medium, [1.0, 2.0], y)

        np.testing.assert_allclose(drifts.b, 0.0, atol=1e-14)
        np.testing.assert_allclose(drifts.c, -y @ sec4_reference, atol=1e-14)


@pytest.mark.unit
class TestSampling:
    """Test grid helpers."""

    def test_sample_grid_shapes(self) -> None:
        """Test that the grid pairs every torus point with every y point."""
        x, y = sample_grid(2, 4, 3, 1.0)

        assert x.shape == (16 * 9, 2)
        assert y.shape == (16 * 9, 2)
        assert y.min() == pytest.approx(-1.0)
        assert x.max() < 2 * np.pi

    def test_reduce_fast_maps_into_cell(self) -> None:
        """Test that reduction lands in [0, 2π)."""
        reduced = reduce_fast(np.array([[-0.5], [7.0]]))

        assert np.all((reduced >= 0.0) & (reduced < 2 * np.pi))
        assert reduced[1, 0] == pytest.approx(7.0 - 2 * np.pi)

"""Unit tests for trigonometric Fourier fields."""

import numpy as np
import pytest

from homog_lab.medium.fourier import FourierField
from homog_lab.medium.models import MediumError


@pytest.mark.unit
class TestFourierFieldEvaluation:
    """Test values and analytic derivatives of Fourier fields."""

    def test_constant_field(self) -> None:
        """Test that a constant field evaluates to its value everywhere."""
        field = FourierField.constant(2, 3.5)
        x = np.array([[0.0, 0.0], [1.0, 2.0], [5.0, -4.0]])

        values = field.evaluate(x, np.zeros_like(x))

        np.testing.assert_allclose(values, 3.5)
        assert field.cutoff == 0

    def test_sum_of_constant_and_sine(self) -> None:
        """Test that 2 + sin x equals 3 at x = π/2."""
        field = FourierField.constant(1, 2.0) + FourierField.sine(1, 1.0, (1,))

        value = field.evaluate([[np.pi / 2]], [[0.0]])

        assert value[0] == pytest.approx(3.0)
        assert field.cutoff == 1

    def test_gradient_x_of_sine(self) -> None:
        """Test that the fast gradient of sin(x₁) is cos(x₁)·e₁."""
        field = FourierField.sine(2, 1.0, (1, 0))
        x = np.array([[0.3, 1.1], [2.0, -0.5]])

        gradient = field.gradient_x(x, np.zeros_like(x))

        np.testing.assert_allclose(gradient[:, 0], np.cos(x[:, 0]), atol=1e-14)
        np.testing.assert_allclose(gradient[:, 1], 0.0, atol=1e-14)

    def test_slow_derivatives_of_cosine(self) -> None:
        """Test the y-gradient and y-Hessian of cos(2y₁)."""
        field = FourierField.cosine(2, 1.0, (0, 0), (2.0, 0.0))
        y = np.array([[0.4, 0.0], [-1.3, 2.0]])
        x = np.zeros_like(y)

        gradient = field.gradient_y(x, y)
        hessian = field.hessian_y(x, y)

        np.testing.assert_allclose(gradient[:, 0], -2.0 * np.sin(2 * y[:, 0]))
        np.testing.assert_allclose(hessian[:, 0, 0], -4.0 * np.cos(2 * y[:, 0]))
        np.testing.assert_allclose(hessian[:, 1, 1], 0.0, atol=1e-14)
        assert not field.is_y_independent

    def test_modes_groups_terms_by_wavevector(self) -> None:
        """Test that sin(x) stores the two conjugate modes ±1."""
        field = FourierField.sine(1, 2.0, (1,))

        modes = field.modes

        assert set(modes) == {(1,), (-1,)}
        assert modes[(1,)][0][1] == pytest.approx(-1j)


@pytest.mark.unit
class TestFourierFieldErrors:
    """Test construction errors of Fourier fields."""

    def test_non_hermitian_terms_raise(self) -> None:
        """Test that a field without its conjugate partner is rejected."""
        # Arrange
        terms = [((1,), (0.0,), 1j)]

        # Act & Assert
        with pytest.raises(MediumError) as exc_info:
            FourierField(1, terms)

        assert "Hermitian" in str(exc_info.value)

    def test_dimension_mismatch_raises(self) -> None:
        """Test that terms of the wrong dimension are rejected."""
        with pytest.raises(MediumError, match="dimension mismatch"):
            FourierField(2, [((1,), (0.0,), 1.0)])

    def test_adding_fields_of_different_dimension_raises(self) -> None:
        """Test that fields of different dimension cannot be added."""
        with pytest.raises(MediumError):
            FourierField.constant(1, 1.0) + FourierField.constant(2, 1.0)

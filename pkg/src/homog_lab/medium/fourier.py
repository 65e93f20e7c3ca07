"""Real trigonometric fields on the torus with smooth slow dependence.

A FourierField represents

    f(x, y) = Σ_m c_m exp(i(k_m·x + ω_m·y))

with integer wavevectors k_m (2π-periodic in the fast variable x) and real
frequencies ω_m in the slow variable y. Grouping terms by k gives the
per-mode y-coefficient y ↦ Σ_ω c_{k,ω} exp(iω·y), which is smooth with
closed-form derivatives of every order. Hermitian symmetry
c(−k, −ω) = conj(c(k, ω)) makes f real.

Example:
    >>> p = FourierField.constant(1, 2.0) + FourierField.sine(1, 1.0, (1,))
    >>> float(p.evaluate([[np.pi / 2]], [[0.0]])[0])
    3.0
"""

from collections import defaultdict
from typing import Iterable, Optional, Sequence

import numpy as np
import numpy.typing as npt

from homog_lab.medium.models import MediumError

FloatArray = npt.NDArray[np.float64]
TermKey = tuple[tuple[int, ...], tuple[float, ...]]

IMAGINARY_TOLERANCE = 1e-12
HERMITIAN_TOLERANCE = 1e-14


class FourierField:
    """Real field with finitely many Fourier modes in x.

    Attributes:
        dim: Spatial dimension d
        wavevectors: Integer array (M, d) of fast wavevectors k_m
        y_frequencies: Array (M, d) of slow frequencies ω_m
        coefficients: Complex array (M,) of coefficients c_m
    """

    def __init__(
        self,
        dim: int,
        terms: Iterable[tuple[Sequence[int], Sequence[float], complex]],
    ) -> None:
        merged: dict[TermKey, complex] = defaultdict(complex)
        for wavevector, y_frequency, coefficient in terms:
            k = tuple(int(v) for v in wavevector)
            w = tuple(float(v) for v in y_frequency)
            if len(k) != dim or len(w) != dim:
                raise MediumError(f"Fourier term dimension mismatch for d={dim}")
            merged[(k, w)] += complex(coefficient)

        keys = sorted(key for key, value in merged.items() if value != 0)
        self.dim = dim
        self.wavevectors = np.array([k for k, _ in keys], dtype=np.int64).reshape(
            -1, dim
        )
        self.y_frequencies = np.array(
            [w for _, w in keys], dtype=np.float64
        ).reshape(-1, dim)
        self.coefficients = np.array([merged[key] for key in keys], dtype=complex)
        self._check_hermitian(merged)

    @classmethod
    def constant(cls, dim: int, value: float) -> "FourierField":
        """Field equal to `value` everywhere."""
        zero = (0,) * dim
        return cls(dim, [(zero, (0.0,) * dim, complex(value))])

    @classmethod
    def sine(
        cls,
        dim: int,
        amplitude: float,
        wavevector: Sequence[int],
        y_frequency: Optional[Sequence[float]] = None,
    ) -> "FourierField":
        """Field amplitude·sin(k·x + ω·y)."""
        k = tuple(wavevector)
        w = tuple(y_frequency) if y_frequency is not None else (0.0,) * dim
        half = amplitude / 2j
        return cls(
            dim,
            [
                (k, w, half),
                (tuple(-v for v in k), tuple(-v for v in w), -half),
            ],
        )

    @classmethod
    def cosine(
        cls,
        dim: int,
        amplitude: float,
        wavevector: Sequence[int],
        y_frequency: Optional[Sequence[float]] = None,
    ) -> "FourierField":
        """Field amplitude·cos(k·x + ω·y)."""
        k = tuple(wavevector)
        w = tuple(y_frequency) if y_frequency is not None else (0.0,) * dim
        half = amplitude / 2
        return cls(
            dim,
            [(k, w, half), (tuple(-v for v in k), tuple(-v for v in w), half)],
        )

    def __add__(self, other: "FourierField") -> "FourierField":
        if other.dim != self.dim:
            raise MediumError("Cannot add fields of different dimension")
        return FourierField(self.dim, [*self._terms(), *other._terms()])

    @property
    def cutoff(self) -> int:
        """Largest |k|_∞ among stored modes."""
        if self.wavevectors.size == 0:
            return 0
        return int(np.abs(self.wavevectors).max())

    @property
    def is_y_independent(self) -> bool:
        return bool(np.all(self.y_frequencies == 0.0))

    @property
    def modes(self) -> dict[tuple[int, ...], list[tuple[tuple[float, ...], complex]]]:
        """Map from wavevector k to its y-coefficient terms (ω, c)."""
        grouped: dict[tuple[int, ...], list[tuple[tuple[float, ...], complex]]] = (
            defaultdict(list)
        )
        for (k, w), c in zip(self._keys(), self.coefficients):
            grouped[k].append((w, complex(c)))
        return dict(grouped)

    def evaluate(self, x: FloatArray, y: FloatArray) -> FloatArray:
        """Evaluate f at paired points x, y of shape (N, d)."""
        terms = self._weighted_phases(x, y)
        return self._real(terms.sum(axis=1))

    def gradient_x(self, x: FloatArray, y: FloatArray) -> FloatArray:
        """Analytic gradient in the fast variable, shape (N, d)."""
        terms = self._weighted_phases(x, y)
        return self._real(1j * terms @ self.wavevectors.astype(np.float64))

    def gradient_y(self, x: FloatArray, y: FloatArray) -> FloatArray:
        """Analytic gradient in the slow variable, shape (N, d)."""
        terms = self._weighted_phases(x, y)
        return self._real(1j * terms @ self.y_frequencies)

    def hessian_y(self, x: FloatArray, y: FloatArray) -> FloatArray:
        """Analytic Hessian in the slow variable, shape (N, d, d)."""
        terms = self._weighted_phases(x, y)
        outer = np.einsum("mi,mj->mij", self.y_frequencies, self.y_frequencies)
        return self._real(-np.einsum("nm,mij->nij", terms, outer))

    def _weighted_phases(
        self, x: FloatArray, y: FloatArray
    ) -> npt.NDArray[np.complex128]:
        x2 = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y2 = np.atleast_2d(np.asarray(y, dtype=np.float64))
        theta = x2 @ self.wavevectors.T.astype(np.float64) + y2 @ self.y_frequencies.T
        weighted: npt.NDArray[np.complex128] = np.exp(1j * theta) * self.coefficients
        return weighted

    def _real(self, values: npt.NDArray[np.complex128]) -> FloatArray:
        scale = 1.0 + float(np.abs(self.coefficients).sum())
        residual = float(np.abs(values.imag).max()) if values.size else 0.0
        if residual > IMAGINARY_TOLERANCE * scale:
            raise MediumError(
                f"Fourier field evaluation left imaginary residual {residual:.3e}"
            )
        return np.ascontiguousarray(values.real)

    def _keys(self) -> list[TermKey]:
        return [
            (tuple(int(v) for v in k), tuple(float(v) for v in w))
            for k, w in zip(self.wavevectors, self.y_frequencies)
        ]

    def _terms(self) -> list[tuple[Sequence[int], Sequence[float], complex]]:
        pairs = zip(self._keys(), self.coefficients)
        return [(k, w, complex(c)) for (k, w), c in pairs]

    def _check_hermitian(self, merged: dict[TermKey, complex]) -> None:
        for (k, w), c in merged.items():
            partner = (tuple(-v for v in k), tuple(-v for v in w))
            partner_c = merged.get(partner, 0j)
            if abs(partner_c - c.conjugate()) > HERMITIAN_TOLERANCE * (1 + abs(c)):
                raise MediumError(
                    f"Fourier field is not Hermitian-symmetric at k={k}, omega={w}"
                )

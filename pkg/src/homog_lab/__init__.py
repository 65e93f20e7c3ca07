"""homog-lab: numerical homogenization laboratory.

Correctors and effective coefficients for divergence-form diffusions with
locally stationary, possibly degenerate coefficients on a periodic medium,
plus Monte Carlo checks that the multiscale diffusion approaches its
homogenized limit.
"""

__version__ = "0.1.0"

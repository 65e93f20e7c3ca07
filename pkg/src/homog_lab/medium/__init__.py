"""Periodic medium: coefficient presets, evaluation and assumption checks."""

from homog_lab.medium.assumptions import (
    check_microscopic_ergodicity,
    validate_assumptions,
)
from homog_lab.medium.evaluation import eval_coeffs, eval_drifts
from homog_lab.medium.models import (
    MediumError,
    MediumSpec,
    UnsupportedPresetError,
    ValidationReport,
)
from homog_lab.medium.presets import build_medium

__all__ = [
    "MediumError",
    "MediumSpec",
    "UnsupportedPresetError",
    "ValidationReport",
    "build_medium",
    "check_microscopic_ergodicity",
    "eval_coeffs",
    "eval_drifts",
    "validate_assumptions",
]

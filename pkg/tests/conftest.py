"""Pytest configuration and shared fixtures for homog-lab tests."""

import json
import logging
from pathlib import Path
from typing import Any, Callable, Iterator

import numpy as np
import pytest

from homog_lab.core.corrector_service import CorrectorService
from homog_lab.core.effective_service import EffectiveService
from homog_lab.core.galerkin import GalerkinBasis
from homog_lab.core.sde_engine import SimulationEngine
from homog_lab.medium.models import MediumSpec
from homog_lab.medium.presets import build_medium
from homog_lab.utils.logging_config import bind_run


@pytest.fixture
def sec4_medium() -> MediumSpec:
    """Degenerate two-dimensional medium with σ̃ = [[1, 1/2], [2, 1]].

    Returns:
        MediumSpec: sec4 preset with c = 2 and no modulation
    """
    return build_medium("sec4", {"c": 2.0})


@pytest.fixture
def sec4_reference() -> np.ndarray:
    """σ̃σ̃* of the sec4 medium with c = 2."""
    return np.array([[1.25, 2.5], [2.5, 5.0]])


@pytest.fixture
def sine1d_medium() -> MediumSpec:
    """One-dimensional medium a(x) = 2 + sin x, harmonic mean √3."""
    return build_medium("sine1d", {"alpha": 2.0, "beta": 1.0})


@pytest.fixture
def unit_medium() -> MediumSpec:
    """Constant one-dimensional medium with a = 1."""
    return build_medium("constant", {"dim": 1, "sigma": [[1.0]]})


@pytest.fixture
def separable_medium() -> MediumSpec:
    """Two-dimensional medium a = p(x)q(y)·Id with y-dependent correctors."""
    return build_medium("separable", {"dim": 2})


@pytest.fixture
def corrector_factory() -> Callable[[int, int], CorrectorService]:
    """Build a CorrectorService on a fresh Galerkin basis.

    Returns:
        callable: factory(dim, cutoff) -> CorrectorService
    """

    def _factory(dim: int, cutoff: int) -> CorrectorService:
        return CorrectorService(GalerkinBasis(dim, cutoff))

    return _factory


@pytest.fixture
def sec4_effective_service() -> EffectiveService:
    """Effective service with the smallest basis that resolves sec4."""
    return EffectiveService(CorrectorService(GalerkinBasis(2, 4)))


@pytest.fixture
def engine() -> SimulationEngine:
    """Single-threaded engine with small blocks (multi-block merges)."""
    return SimulationEngine(threads=1, block_size=64)


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[dict[str, Any], str], Path]:
    """Write an experiment config as JSON into tmp_path.

    Returns:
        callable: write(payload, name="experiment.json") -> Path
    """

    def _write(payload: dict[str, Any], name: str = "experiment.json") -> Path:
        target = tmp_path / name
        target.write_text(json.dumps(payload), encoding="utf-8")
        return target

    return _write


@pytest.fixture
def restore_root_logger() -> Iterator[logging.Logger]:
    """Put the root logger back the way pytest configured it.

    setup_logging replaces the root handlers; tests that call it (directly
    or through the command line) must not leak handlers into later tests.
    """
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield root
    for handler in root.handlers:
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)
    logging.captureWarnings(False)
    bind_run(None)

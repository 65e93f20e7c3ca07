"""File I/O for reports, tensor tables and trajectory ensembles.

Ensemble files are a little-endian uint64 header length, a UTF-8 JSON
header, then the states as row-major '<f8' of shape (P, S, d).
"""

import csv
import hashlib
import json
import logging
import struct
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from homog_lab.core.effective_service import EffectiveTensors
from homog_lab.core.sde_engine import TrajectoryEnsemble

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

ENSEMBLE_FORMAT = "homog-ensemble"
ENSEMBLE_VERSION = 1
CSV_PATH_LIMIT = 10_000


class MissingInputError(Exception):
    """Raised when an input file is absent or unreadable."""

    pass


def config_hash(data: dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, compact separators)."""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_json(path: PathLike, data: dict[str, Any]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    logger.debug(f"Wrote {target}")
    return target


def read_json(path: PathLike) -> dict[str, Any]:
    """Load a JSON object.

    Raises:
        MissingInputError: If the file does not exist or is not valid JSON
    """
    source = Path(path)
    if not source.is_file():
        raise MissingInputError(f"Input file not found: {source}")
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise MissingInputError(f"Invalid JSON in {source}: {e}") from e
    if not isinstance(data, dict):
        raise MissingInputError(f"Expected a JSON object in {source}")
    return data


def save_tensors(path: PathLike, tensors: EffectiveTensors) -> Path:
    return write_json(path, tensors.to_json())


def load_tensors(path: PathLike) -> EffectiveTensors:
    """Load a tensor table written by `save_tensors`.

    Raises:
        MissingInputError: If the file is absent or malformed
    """
    data = read_json(path)
    try:
        return EffectiveTensors.from_json(data)
    except (KeyError, ValueError, TypeError) as e:
        raise MissingInputError(f"Malformed tensor table {path}: {e}") from e


def save_ensemble(path: PathLike, ensemble: TrajectoryEnsemble) -> Path:
    """Write an ensemble in the binary layout described above."""
    header = {
        "format": ENSEMBLE_FORMAT,
        "version": ENSEMBLE_VERSION,
        "config_hash": ensemble.metadata.get("config_hash"),
        "d": ensemble.dim,
        "P": ensemble.path_count,
        "times": ensemble.times.tolist(),
        "path_ids": ensemble.path_ids.tolist(),
        "flagged": np.flatnonzero(ensemble.flagged).tolist(),
        "escaped": np.flatnonzero(ensemble.escaped).tolist(),
        "metadata": ensemble.metadata,
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(ensemble.states, dtype="<f8")

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("wb") as handle:
        handle.write(struct.pack("<Q", len(encoded)))
        handle.write(encoded)
        handle.write(payload.tobytes(order="C"))
    logger.info(
        f"Saved ensemble {target} (P={ensemble.path_count}, "
        f"S={ensemble.times.size}, d={ensemble.dim})"
    )
    return target


def load_ensemble(path: PathLike) -> TrajectoryEnsemble:
    """Read an ensemble written by `save_ensemble`.

    Raises:
        MissingInputError: If the file is absent, truncated or not an
            ensemble file
    """
    source = Path(path)
    if not source.is_file():
        raise MissingInputError(f"Ensemble file not found: {source}")
    raw = source.read_bytes()
    if len(raw) < 8:
        raise MissingInputError(f"Ensemble file {source} is truncated")
    (length,) = struct.unpack("<Q", raw[:8])
    try:
        header = json.loads(raw[8 : 8 + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MissingInputError(f"Corrupt ensemble header in {source}") from e
    if header.get("format") != ENSEMBLE_FORMAT:
        raise MissingInputError(f"{source} is not an ensemble file")

    p, d = int(header["P"]), int(header["d"])
    times = np.asarray(header["times"], dtype=np.float64)
    payload = raw[8 + length :]
    expected = p * times.size * d * 8
    if len(payload) != expected:
        raise MissingInputError(
            f"Ensemble payload of {source} has {len(payload)} bytes, "
            f"expected {expected}"
        )
    states = np.frombuffer(payload, dtype="<f8").reshape(p, times.size, d).copy()
    flagged = np.zeros(p, dtype=bool)
    flagged[np.asarray(header["flagged"], dtype=np.int64)] = True
    escaped = np.zeros(p, dtype=bool)
    escaped[np.asarray(header["escaped"], dtype=np.int64)] = True
    return TrajectoryEnsemble(
        times=times,
        states=states,
        path_ids=np.asarray(header["path_ids"], dtype=np.int64),
        flagged=flagged,
        escaped=escaped,
        metadata=dict(header.get("metadata", {})),
    )


def export_csv(
    path: PathLike, ensemble: TrajectoryEnsemble, comment: Optional[str] = None
) -> Path:
    """Rows (path_id, t, x_1..x_d); meant for small runs only.

    A comment, when given, is written first as a "# " line.
    """
    if ensemble.path_count > CSV_PATH_LIMIT:
        logger.warning(
            f"CSV export of {ensemble.path_count} paths; consider the binary file"
        )
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        if comment:
            handle.write(f"# {comment}\n")
        writer.writerow(
            ["path_id", "t"] + [f"x_{i + 1}" for i in range(ensemble.dim)]
        )
        for row, path_id in enumerate(ensemble.path_ids):
            for s, t in enumerate(ensemble.times):
                writer.writerow(
                    [int(path_id), repr(float(t))]
                    + [repr(float(v)) for v in ensemble.states[row, s]]
                )
    return target


def write_rows(
    path: PathLike,
    header: list[str],
    rows: list[list[Any]],
    comment: Optional[str] = None,
) -> Path:
    """Plain CSV table, optionally preceded by a "# " comment line."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        if comment:
            handle.write(f"# {comment}\n")
        writer.writerow(header)
        writer.writerows(rows)
    return target

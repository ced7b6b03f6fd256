"""Externally supplied per-vertex features (CSV or binary float64)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from fmapforge.exceptions import DimensionMismatch, ParseError
from fmapforge.schema import FeatureMatrix, SpectralBasis
from fmapforge.utils.arrays import load_arrays, save_arrays
from fmapforge.utils.file_utils import read_file, write_file

FEATURE_KIND = "features"
BINARY_SUFFIXES = {".fmf", ".bin"}


def read_feature_values(path: str | Path) -> np.ndarray:
    """Read an n × c feature table.

    ``.csv``/``.txt`` files hold comma-separated rows without a header;
    ``.fmf``/``.bin`` files use the binary array container.

    Raises:
        ParseError: If the file is malformed.
    """
    feature_path = Path(path)
    if feature_path.suffix.lower() in BINARY_SUFFIXES:
        (values,), _ = load_arrays(feature_path, FEATURE_KIND)
        return values.reshape(values.shape[0], -1)

    try:
        text = read_file(feature_path)
    except FileNotFoundError as exc:
        raise ParseError("File not found", path=feature_path) from exc
    rows: list[list[float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            row = [float(token) for token in line.split(",")]
        except ValueError as exc:
            raise ParseError("Non-numeric feature value", feature_path, lineno) from exc
        if rows and len(row) != len(rows[0]):
            raise ParseError(
                f"Row has {len(row)} columns, expected {len(rows[0])}", feature_path, lineno
            )
        rows.append(row)
    if not rows:
        raise ParseError("No feature rows", path=feature_path)
    return np.asarray(rows, dtype=np.float64)


def load_features(path: str | Path, basis: SpectralBasis) -> FeatureMatrix:
    """Load features for the mesh of ``basis`` and project them.

    Raises:
        ParseError: If the file is malformed.
        DimensionMismatch: If the row count differs from the vertex count.
    """
    values = read_feature_values(path)
    if values.shape[0] != basis.n:
        raise DimensionMismatch(
            f"{path} has {values.shape[0]} rows but the mesh has {basis.n} vertices",
            expected=basis.n,
            actual=values.shape[0],
        )
    return FeatureMatrix.from_values(values, basis)


def save_features(features: FeatureMatrix, path: str | Path) -> Path:
    """Write feature values as CSV or binary depending on the suffix."""
    out = Path(path)
    if out.suffix.lower() in BINARY_SUFFIXES:
        return save_arrays(out, FEATURE_KIND, [features.values])
    lines = [",".join(repr(float(x)) for x in row) for row in features.values]
    return write_file(out, "\n".join(lines) + "\n")

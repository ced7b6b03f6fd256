"""Files for functional maps and point maps.

Functional maps are written twice: a header-less CSV for inspection and a
binary ``.fmap`` copy whose header flag records the provenance. Hard point
maps are text files with one 0-based X index per line; soft point maps are
binary ``.pmap`` files holding the dense n_Y × n_X weights.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import sparse

from fmapforge.exceptions import ParseError
from fmapforge.mesh.io import load_correspondence
from fmapforge.schema import FunctionalMap, PointMap, PointMapKind, Provenance
from fmapforge.utils.arrays import load_arrays, save_arrays
from fmapforge.utils.file_utils import format_float, read_file, write_file

FMAP_KIND = "fmap"
POINTMAP_KIND = "pointmap"
SOFT_SUFFIX = ".pmap"

_PROVENANCE_FLAGS = {Provenance.SOLVED: 0, Provenance.CONVERTED: 1}


def save_fmap(fmap: FunctionalMap, path: str | Path) -> list[Path]:
    """Write ``<stem>.csv`` and ``<stem>.fmap`` next to ``path``."""
    base = Path(path)
    lines = [",".join(format_float(x) for x in row) for row in fmap.matrix]
    return [
        write_file(base.with_suffix(".csv"), "\n".join(lines) + "\n"),
        save_arrays(
            base.with_suffix(".fmap"),
            FMAP_KIND,
            [fmap.matrix],
            flags=_PROVENANCE_FLAGS[fmap.provenance],
        ),
    ]


def load_fmap(path: str | Path, provenance: Provenance = Provenance.SOLVED) -> FunctionalMap:
    """Read a functional map from ``.fmap`` or ``.csv``.

    Binary files carry their own provenance; CSV files get ``provenance``.

    Raises:
        ParseError: If the file is malformed.
    """
    map_path = Path(path)
    if map_path.suffix.lower() == ".fmap":
        (matrix,), flags = load_arrays(map_path, FMAP_KIND)
        by_flag = {v: k for k, v in _PROVENANCE_FLAGS.items()}
        if flags not in by_flag or matrix.ndim != 2:
            raise ParseError("Not a functional map file", path=map_path)
        return FunctionalMap(matrix=matrix, provenance=by_flag[flags])

    try:
        text = read_file(map_path)
    except FileNotFoundError as exc:
        raise ParseError("File not found", path=map_path) from exc
    rows: list[list[float]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([float(token) for token in line.split(",")])
        except ValueError as exc:
            raise ParseError("Non-numeric matrix entry", map_path, lineno) from exc
        if len(rows[-1]) != len(rows[0]):
            raise ParseError("Ragged matrix row", map_path, lineno)
    if not rows:
        raise ParseError("Empty matrix", path=map_path)
    return FunctionalMap(matrix=np.asarray(rows), provenance=provenance)


def pointmap_path(path: str | Path, kind: PointMapKind) -> Path:
    """Return ``path`` with the suffix used for ``kind``."""
    base = Path(path)
    return base.with_suffix(SOFT_SUFFIX if kind is PointMapKind.SOFT else ".txt")


def save_pointmap(pi: PointMap, path: str | Path) -> Path:
    """Write a hard map as text or a soft map as binary."""
    out = pointmap_path(path, pi.kind)
    if pi.kind is PointMapKind.HARD:
        assert pi.indices is not None
        return write_file(out, "".join(f"{int(i)}\n" for i in pi.indices))
    weights = pi.weights.toarray() if sparse.issparse(pi.weights) else pi.weights
    return save_arrays(out, POINTMAP_KIND, [weights])


def load_pointmap(path: str | Path, n_target: int) -> PointMap:
    """Read a point map written by :func:`save_pointmap`.

    Raises:
        ParseError: If the file is malformed.
        InvalidArgument: If the indices or weights are invalid for ``n_target``.
    """
    map_path = Path(path)
    if map_path.suffix.lower() == SOFT_SUFFIX:
        (weights,), _ = load_arrays(map_path, POINTMAP_KIND)
        if weights.ndim != 2:
            raise ParseError("Soft map must be a matrix", path=map_path)
        return PointMap.soft(weights)
    return PointMap.hard(load_correspondence(map_path), n_target=n_target)

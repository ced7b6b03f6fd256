"""Mesh readers and writers for OFF, OBJ and ASCII PLY.

Only positions and faces are read; normals, UVs and colours are ignored.
Polygons with more than three corners are fan-triangulated. Indices are
0-based internally, so OBJ's 1-based (and negative, relative) indices are
converted here at the I/O boundary.
"""

from __future__ import annotations

from enum import Enum
from pathlib import Path

import numpy as np

from fmapforge.exceptions import ParseError
from fmapforge.schema import TriangleMesh
from fmapforge.utils.file_utils import read_file, write_file


class MeshFormat(str, Enum):
    """Supported mesh file formats."""

    OFF = "off"
    OBJ = "obj"
    PLY = "ply"


def load_mesh(path: str | Path, format: MeshFormat | str | None = None) -> TriangleMesh:
    """Load a triangle mesh, preserving the file's vertex order.

    Args:
        path: Mesh file.
        format: Explicit format; inferred from the suffix when omitted.

    Returns:
        A validated TriangleMesh.

    Raises:
        ParseError: If the file is malformed or the format is unknown.
        DegenerateMesh: If the connectivity violates the mesh invariants.
    """
    mesh_path = Path(path)
    fmt = _resolve_format(mesh_path, format)
    try:
        text = read_file(mesh_path)
    except FileNotFoundError as exc:
        raise ParseError("File not found", path=mesh_path) from exc
    except UnicodeDecodeError as exc:
        raise ParseError("Not a text file (binary PLY is not supported)", path=mesh_path) from exc

    readers = {MeshFormat.OFF: _parse_off, MeshFormat.OBJ: _parse_obj, MeshFormat.PLY: _parse_ply}
    vertices, faces = readers[fmt](text, mesh_path)
    return TriangleMesh(vertices=vertices, faces=faces)


def save_mesh(mesh: TriangleMesh, path: str | Path) -> Path:
    """Write a mesh as OFF or OBJ depending on the suffix.

    Args:
        mesh: Mesh to write.
        path: Output path ending in .off or .obj.

    Returns:
        The resolved output path.
    """
    out = Path(path)
    fmt = _resolve_format(out, None)
    lines: list[str] = []
    if fmt is MeshFormat.OFF:
        lines.append("OFF")
        lines.append(f"{mesh.n} {mesh.n_faces} 0")
        lines.extend(" ".join(repr(float(x)) for x in v) for v in mesh.vertices)
        lines.extend("3 " + " ".join(str(int(i)) for i in f) for f in mesh.faces)
    elif fmt is MeshFormat.OBJ:
        lines.extend("v " + " ".join(repr(float(x)) for x in v) for v in mesh.vertices)
        lines.extend("f " + " ".join(str(int(i) + 1) for i in f) for f in mesh.faces)
    else:
        raise ParseError("Writing PLY is not supported", path=out)
    return write_file(out, "\n".join(lines) + "\n")


def _resolve_format(path: Path, format: MeshFormat | str | None) -> MeshFormat:
    raw = format.value if isinstance(format, MeshFormat) else format
    raw = (raw or path.suffix.lstrip(".")).lower()
    try:
        return MeshFormat(raw)
    except ValueError as exc:
        raise ParseError(f"Unknown mesh format '{raw}'", path=path) from exc


def _fan(polygon: list[int]) -> list[list[int]]:
    return [[polygon[0], polygon[i], polygon[i + 1]] for i in range(1, len(polygon) - 1)]


def _content_lines(text: str) -> list[tuple[int, list[str]]]:
    """Return (1-based line number, tokens) for non-empty, non-comment lines."""
    out: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append((lineno, line.split()))
    return out


def _floats(tokens: list[str], path: Path, lineno: int) -> list[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"Expected numbers, got {' '.join(tokens)!r}", path, lineno) from exc


def _ints(tokens: list[str], path: Path, lineno: int) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"Expected integers, got {' '.join(tokens)!r}", path, lineno) from exc


# ---------------------------------------------------------------------------
# OFF
# ---------------------------------------------------------------------------


def _parse_off(text: str, path: Path) -> tuple[np.ndarray, np.ndarray]:
    lines = _content_lines(text)
    if not lines:
        raise ParseError("Empty OFF file", path)

    lineno, tokens = lines[0]
    head = tokens[0]
    if not head.endswith("OFF"):
        raise ParseError(f"Missing OFF header, got {head!r}", path, lineno)
    # Counts may follow the keyword on the same line ("OFF 8 6 0").
    counts_tokens = tokens[1:]
    cursor = 1
    if not counts_tokens:
        if len(lines) < 2:
            raise ParseError("Missing OFF element counts", path, lineno)
        lineno, counts_tokens = lines[1]
        cursor = 2
    counts = _ints(counts_tokens[:3], path, lineno)
    if len(counts) < 2:
        raise ParseError("OFF counts need at least vertex and face counts", path, lineno)
    n_vertices, n_faces = counts[0], counts[1]

    body = lines[cursor:]
    if len(body) < n_vertices + n_faces:
        last = lines[-1][0]
        raise ParseError(
            f"Expected {n_vertices} vertices and {n_faces} faces, file ends early", path, last
        )

    vertices = []
    for lineno, tokens in body[:n_vertices]:
        coords = _floats(tokens[:3], path, lineno)
        if len(coords) != 3:
            raise ParseError("Vertex needs three coordinates", path, lineno)
        vertices.append(coords)

    faces: list[list[int]] = []
    for lineno, tokens in body[n_vertices : n_vertices + n_faces]:
        values = _ints(tokens, path, lineno)
        size = values[0]
        if size < 3 or len(values) < size + 1:
            raise ParseError(f"Malformed face record {tokens!r}", path, lineno)
        faces.extend(_fan(values[1 : size + 1]))

    return np.asarray(vertices, dtype=np.float64), np.asarray(faces, dtype=np.int64)


# ---------------------------------------------------------------------------
# OBJ
# ---------------------------------------------------------------------------


def _obj_index(token: str, n_vertices: int, path: Path, lineno: int) -> int:
    head = token.split("/", 1)[0]
    try:
        idx = int(head)
    except ValueError as exc:
        raise ParseError(f"Bad face index {token!r}", path, lineno) from exc
    if idx == 0:
        raise ParseError("OBJ indices are 1-based; got 0", path, lineno)
    return idx - 1 if idx > 0 else n_vertices + idx


def _parse_obj(text: str, path: Path) -> tuple[np.ndarray, np.ndarray]:
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    for lineno, tokens in _content_lines(text):
        tag = tokens[0]
        if tag == "v":
            coords = _floats(tokens[1:4], path, lineno)
            if len(coords) != 3:
                raise ParseError("Vertex needs three coordinates", path, lineno)
            vertices.append(coords)
        elif tag == "f":
            if len(tokens) < 4:
                raise ParseError("Face needs at least three corners", path, lineno)
            polygon = [_obj_index(t, len(vertices), path, lineno) for t in tokens[1:]]
            faces.extend(_fan(polygon))

    if not vertices:
        raise ParseError("No vertices found", path)
    if not faces:
        raise ParseError("No faces found", path)
    return np.asarray(vertices, dtype=np.float64), np.asarray(faces, dtype=np.int64)


# ---------------------------------------------------------------------------
# PLY (ASCII)
# ---------------------------------------------------------------------------


def _parse_ply(text: str, path: Path) -> tuple[np.ndarray, np.ndarray]:
    raw_lines = text.splitlines()
    if not raw_lines or raw_lines[0].strip() != "ply":
        raise ParseError("Missing 'ply' magic", path, 1)

    elements: list[tuple[str, int, list[str]]] = []
    header_end = None
    for lineno, raw in enumerate(raw_lines[1:], start=2):
        tokens = raw.split()
        if not tokens or tokens[0] == "comment" or tokens[0] == "obj_info":
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise ParseError("Only ASCII PLY is supported", path, lineno)
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise ParseError("Malformed element line", path, lineno)
            elements.append((tokens[1], _ints(tokens[2:], path, lineno)[0], []))
        elif tokens[0] == "property":
            if not elements:
                raise ParseError("Property before any element", path, lineno)
            elements[-1][2].append(tokens[-1])
        elif tokens[0] == "end_header":
            header_end = lineno
            break
        else:
            raise ParseError(f"Unknown header keyword {tokens[0]!r}", path, lineno)
    if header_end is None:
        raise ParseError("Missing end_header", path)

    body = [
        (lineno, raw.split())
        for lineno, raw in enumerate(raw_lines[header_end:], start=header_end + 1)
        if raw.strip()
    ]
    cursor = 0
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    for name, count, props in elements:
        block = body[cursor : cursor + count]
        if len(block) < count:
            raise ParseError(f"Element '{name}' declares {count} rows, file ends early", path)
        cursor += count
        if name == "vertex":
            try:
                cols = [props.index(axis) for axis in ("x", "y", "z")]
            except ValueError as exc:
                raise ParseError("Vertex element lacks x/y/z properties", path) from exc
            for lineno, tokens in block:
                values = _floats(tokens, path, lineno)
                if len(values) < len(props):
                    raise ParseError("Vertex row shorter than its properties", path, lineno)
                vertices.append([values[c] for c in cols])
        elif name == "face":
            for lineno, tokens in block:
                values = _ints(tokens, path, lineno)
                size = values[0]
                if size < 3 or len(values) < size + 1:
                    raise ParseError(f"Malformed face record {tokens!r}", path, lineno)
                faces.extend(_fan(values[1 : size + 1]))

    if not vertices:
        raise ParseError("No vertex element", path)
    if not faces:
        raise ParseError("No face element", path)
    return np.asarray(vertices, dtype=np.float64), np.asarray(faces, dtype=np.int64)


def load_correspondence(path: str | Path) -> np.ndarray:
    """Read a ground-truth correspondence file (one 0-based index per line).

    Args:
        path: Text file.

    Returns:
        Integer index array.

    Raises:
        ParseError: If a line is not a non-negative integer.
    """
    corr_path = Path(path)
    try:
        text = read_file(corr_path)
    except FileNotFoundError as exc:
        raise ParseError("File not found", path=corr_path) from exc
    indices: list[int] = []
    for lineno, tokens in _content_lines(text):
        if len(tokens) != 1:
            raise ParseError("Expected one index per line", corr_path, lineno)
        value = _ints(tokens, corr_path, lineno)[0]
        if value < 0:
            raise ParseError(f"Negative index {value}", corr_path, lineno)
        indices.append(value)
    return np.asarray(indices, dtype=np.int64)

"""File utilities: reading, writing, CSV tables and path management."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any


def read_file(path: str | Path) -> str:
    """Read a file and return its contents as a string.

    Args:
        path: Path to the file.

    Returns:
        File contents as a string.

    Raises:
        FileNotFoundError: If the file doesn't exist.
    """
    return Path(path).read_text(encoding="utf-8")


def write_file(path: str | Path, content: str) -> Path:
    """Write content to a file, creating parent directories if needed.

    Args:
        path: Output file path.
        content: Content to write.

    Returns:
        The resolved Path to the written file.
    """
    output_path = Path(path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text(content, encoding="utf-8")
    return output_path.resolve()


def write_bytes(path: str | Path, payload: bytes) -> Path:
    """Write binary content, creating parent directories if needed."""
    output_path = Path(path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_bytes(payload)
    return output_path.resolve()


def format_float(value: float) -> str:
    """Shortest round-trip representation, so reruns are byte-identical."""
    return repr(float(value))


def write_csv(
    path: str | Path,
    fieldnames: list[str],
    rows: Iterable[Mapping[str, Any]],
) -> Path:
    """Write rows as CSV with a header line.

    Floats are written with :func:`format_float`.

    Args:
        path: Output file path.
        fieldnames: Column order.
        rows: One mapping per row.

    Returns:
        The resolved Path to the written file.
    """
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(
            {key: format_float(val) if isinstance(val, float) else val for key, val in row.items()}
        )
    return write_file(path, buffer.getvalue())


def read_csv(path: str | Path) -> list[dict[str, str]]:
    """Read a CSV file with a header line into a list of row dicts.

    Raises:
        FileNotFoundError: If the file doesn't exist.
        csv.Error: If the content is not valid CSV.
    """
    with Path(path).open(encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle, strict=True))


def resolve_output_dir(output_dir: str | Path | None, default: str | Path) -> Path:
    """Return ``output_dir`` or ``default`` as a Path (not created)."""
    return Path(output_dir) if output_dir else Path(default)

"""Versioned little-endian float64 array container.

Layout::

    magic  b"FMFG"                 4 bytes
    version                         uint32
    kind   ascii, NUL padded        8 bytes
    flags                           uint32
    count                           uint32
    count × (ndim uint32, ndim × uint64 shape, prod(shape) × float64)

Used for spectral caches, functional maps, soft point maps and feature
files. All integers and floats are little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from fmapforge.exceptions import ParseError
from fmapforge.utils.file_utils import write_bytes

MAGIC = b"FMFG"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sI8sII")
_U32 = struct.Struct("<I")


def encode_arrays(kind: str, arrays: list[np.ndarray], flags: int = 0) -> bytes:
    """Serialise float arrays under a kind tag.

    Args:
        kind: Up to 8 ASCII characters naming the payload (e.g. ``"basis"``).
        arrays: Arrays to store; converted to little-endian float64.
        flags: Free-form integer stored in the header.

    Returns:
        The encoded payload.
    """
    tag = kind.encode("ascii")
    if len(tag) > 8:
        raise ValueError(f"Kind tag '{kind}' longer than 8 bytes")
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, tag.ljust(8, b"\0"), flags, len(arrays))]
    for arr in arrays:
        data = np.ascontiguousarray(arr, dtype="<f8")
        parts.append(_U32.pack(data.ndim))
        parts.append(struct.pack(f"<{data.ndim}Q", *data.shape))
        parts.append(data.tobytes())
    return b"".join(parts)


def decode_arrays(
    payload: bytes, kind: str, path: str | Path | None = None
) -> tuple[list[np.ndarray], int]:
    """Decode a payload written by :func:`encode_arrays`.

    Args:
        payload: Raw bytes.
        kind: Expected kind tag.
        path: Source file, for error messages.

    Returns:
        (arrays, flags).

    Raises:
        ParseError: On a wrong magic, version or kind, or truncated data.
    """
    if len(payload) < _HEADER.size:
        raise ParseError("Truncated header", path=path)
    magic, version, tag, flags, count = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise ParseError("Not an fmapforge array file (bad magic)", path=path)
    if version != FORMAT_VERSION:
        raise ParseError(f"Unsupported format version {version}", path=path)
    found = tag.rstrip(b"\0").decode("ascii", errors="replace")
    if found != kind:
        raise ParseError(f"Expected '{kind}' payload, found '{found}'", path=path)

    offset = _HEADER.size
    arrays: list[np.ndarray] = []
    for _ in range(count):
        if offset + _U32.size > len(payload):
            raise ParseError("Truncated array header", path=path)
        (ndim,) = _U32.unpack_from(payload, offset)
        offset += _U32.size
        shape_size = 8 * ndim
        if offset + shape_size > len(payload):
            raise ParseError("Truncated array shape", path=path)
        shape = struct.unpack_from(f"<{ndim}Q", payload, offset)
        offset += shape_size
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if offset + nbytes > len(payload):
            raise ParseError("Truncated array data", path=path)
        data = np.frombuffer(payload, dtype="<f8", count=nbytes // 8, offset=offset)
        arrays.append(data.reshape(shape).astype(np.float64))
        offset += nbytes
    if offset != len(payload):
        raise ParseError("Trailing bytes after last array", path=path)
    return arrays, int(flags)


def save_arrays(path: str | Path, kind: str, arrays: list[np.ndarray], flags: int = 0) -> Path:
    """Encode and write arrays to ``path``."""
    return write_bytes(path, encode_arrays(kind, arrays, flags))


def load_arrays(path: str | Path, kind: str) -> tuple[list[np.ndarray], int]:
    """Read and decode an array file.

    Raises:
        ParseError: If the file is missing or malformed.
    """
    file_path = Path(path)
    try:
        payload = file_path.read_bytes()
    except FileNotFoundError as exc:
        raise ParseError("File not found", path=file_path) from exc
    return decode_arrays(payload, kind, path=file_path)

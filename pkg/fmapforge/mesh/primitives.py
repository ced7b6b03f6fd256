"""Procedural meshes used by tests, the theory checks and the CLI.

The bundled collection is deliberately asymmetric (smoothly bumped), so
its spectral descriptors separate every vertex and self-matching is
well posed.
"""

from __future__ import annotations

from collections.abc import Callable
from functools import cache

import numpy as np
import trimesh.creation

from fmapforge.exceptions import InvalidArgument
from fmapforge.schema import TriangleMesh


def icosphere(subdivisions: int = 2, radius: float = 1.0) -> TriangleMesh:
    """Return a geodesic sphere (12 vertices at 0 subdivisions, 642 at 3)."""
    if subdivisions < 0:
        raise InvalidArgument("subdivisions must be non-negative")
    sphere = trimesh.creation.icosphere(subdivisions=subdivisions, radius=radius)
    return TriangleMesh(vertices=np.asarray(sphere.vertices), faces=np.asarray(sphere.faces))


def bumpy_sphere(subdivisions: int = 3, amplitude: float = 0.2) -> TriangleMesh:
    """Return an icosphere with an asymmetric smooth radial displacement."""
    base = icosphere(subdivisions)
    x, y, z = base.vertices.T
    bump = 0.5 * x + 0.35 * y * z + 0.3 * x * x * y + 0.2 * np.sin(2.0 * z + 0.3)
    vertices = base.vertices * (1.0 + amplitude * bump)[:, None]
    return TriangleMesh(vertices=vertices, faces=base.faces)


def grid(nx: int = 5, ny: int = 5, width: float = 1.0, height: float = 1.0) -> TriangleMesh:
    """Return a flat rectangular grid of nx × ny vertices in the z=0 plane.

    Vertex (i, j) has index j * nx + i and sits at (i·width/(nx-1), j·height/(ny-1)).
    """
    if nx < 2 or ny < 2:
        raise InvalidArgument("A grid needs at least 2 × 2 vertices")
    xs = np.linspace(0.0, width, nx)
    ys = np.linspace(0.0, height, ny)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(nx * ny)])

    i, j = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1))
    v00 = (j * nx + i).ravel()
    v10, v01, v11 = v00 + 1, v00 + nx, v00 + nx + 1
    faces = np.concatenate(
        [np.stack([v00, v10, v11], axis=1), np.stack([v00, v11, v01], axis=1)]
    )
    return TriangleMesh(vertices=vertices, faces=faces)


def height_field(nx: int = 24, ny: int = 24) -> TriangleMesh:
    """Return a unit-square grid lifted by an asymmetric smooth bump (open surface)."""
    flat = grid(nx, ny)
    x, y = flat.vertices[:, 0], flat.vertices[:, 1]
    z = (
        0.25 * np.exp(-((x - 0.3) ** 2 + (y - 0.65) ** 2) / 0.04)
        + 0.12 * x * y * y
        + 0.05 * np.sin(3.0 * x + 1.0)
    )
    return TriangleMesh(vertices=np.column_stack([x, y, z]), faces=flat.faces)


def bumpy_torus(
    n_major: int = 32, n_minor: int = 14, major: float = 1.0, minor: float = 0.35
) -> TriangleMesh:
    """Return a torus whose tube radius varies smoothly and asymmetrically."""
    if n_major < 3 or n_minor < 3:
        raise InvalidArgument("A torus needs at least 3 samples per direction")
    u = np.linspace(0.0, 2.0 * np.pi, n_major, endpoint=False)
    v = np.linspace(0.0, 2.0 * np.pi, n_minor, endpoint=False)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    tube = minor * (1.0 + 0.25 * np.cos(uu + 0.4) * np.sin(vv) + 0.15 * np.sin(2.0 * uu))
    ring = major + tube * np.cos(vv)
    vertices = np.column_stack(
        [(ring * np.cos(uu)).ravel(), (ring * np.sin(uu)).ravel(), (tube * np.sin(vv)).ravel()]
    )

    i, j = np.meshgrid(np.arange(n_major), np.arange(n_minor), indexing="ij")
    a = (i * n_minor + j).ravel()
    b = (((i + 1) % n_major) * n_minor + j).ravel()
    c = (((i + 1) % n_major) * n_minor + (j + 1) % n_minor).ravel()
    d = (i * n_minor + (j + 1) % n_minor).ravel()
    faces = np.concatenate([np.stack([a, b, c], axis=1), np.stack([a, c, d], axis=1)])
    return TriangleMesh(vertices=vertices, faces=faces)


def octahedron() -> TriangleMesh:
    """Regular octahedron with unit circumradius; vertices ±x, ±y, ±z."""
    vertices = np.array(
        [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.float64
    )
    faces = np.array(
        [
            [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
            [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
        ]
    )  # fmt: skip
    return TriangleMesh(vertices=vertices, faces=faces)


def tetrahedron() -> TriangleMesh:
    """Regular tetrahedron inscribed in the cube [-1, 1]³."""
    vertices = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64)
    faces = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return TriangleMesh(vertices=vertices, faces=faces)


@cache
def _bundled_bumpy_sphere() -> TriangleMesh:
    return bumpy_sphere()


@cache
def _bundled_height_field() -> TriangleMesh:
    return height_field()


@cache
def _bundled_bumpy_torus() -> TriangleMesh:
    return bumpy_torus()


BUNDLED_MESHES: dict[str, Callable[[], TriangleMesh]] = {
    "bumpy_sphere": _bundled_bumpy_sphere,
    "height_field": _bundled_height_field,
    "bumpy_torus": _bundled_bumpy_torus,
}


def bundled_mesh(name: str) -> TriangleMesh:
    """Return one of the bundled test meshes by name.

    Raises:
        InvalidArgument: If ``name`` is unknown.
    """
    try:
        return BUNDLED_MESHES[name]()
    except KeyError as exc:
        known = ", ".join(sorted(BUNDLED_MESHES))
        raise InvalidArgument(f"Unknown bundled mesh '{name}' (known: {known})") from exc

"""Mesh transforms for building synthetic matching pairs."""

from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

from fmapforge.exceptions import InvalidArgument
from fmapforge.schema import PointMap, TriangleMesh


def rigid_transform(mesh: TriangleMesh, rng: np.random.Generator) -> TriangleMesh:
    """Apply a random rotation and translation to the vertices."""
    rotation = Rotation.from_rotvec(rng.normal(size=3))
    translation = rng.normal(size=3)
    return TriangleMesh(vertices=rotation.apply(mesh.vertices) + translation, faces=mesh.faces)


def scale(mesh: TriangleMesh, factor: float) -> TriangleMesh:
    """Scale vertices uniformly about the origin."""
    if factor <= 0:
        raise InvalidArgument(f"Scale factor must be positive, got {factor}")
    return TriangleMesh(vertices=mesh.vertices * factor, faces=mesh.faces)


def permuted_copy(
    mesh: TriangleMesh,
    rng: np.random.Generator | None = None,
    permutation: np.ndarray | None = None,
) -> tuple[TriangleMesh, PointMap]:
    """Relabel the vertices of a mesh.

    Vertex i of the copy Y is vertex ``permutation[i]`` of X, and faces are
    remapped so Y is the same surface. The returned hard map sends each Y
    vertex to its X vertex, so Φ_Y = Π Φ_X holds row for row.

    Args:
        mesh: Source mesh X.
        rng: Random generator used when ``permutation`` is omitted.
        permutation: Explicit permutation of ``range(n)``.

    Returns:
        (Y, Π_YX).
    """
    if permutation is None:
        if rng is None:
            raise InvalidArgument("Pass either rng or permutation")
        permutation = rng.permutation(mesh.n)
    permutation = np.asarray(permutation, dtype=np.int64)
    if not np.array_equal(np.sort(permutation), np.arange(mesh.n)):
        raise InvalidArgument("permutation must be a permutation of range(n)")

    inverse = np.empty_like(permutation)
    inverse[permutation] = np.arange(mesh.n)
    copy = TriangleMesh(vertices=mesh.vertices[permutation], faces=inverse[mesh.faces])
    return copy, PointMap.hard(permutation, n_target=mesh.n)


def smooth_deformation(
    mesh: TriangleMesh,
    rng: np.random.Generator,
    amplitude: float = 0.04,
    n_waves: int = 3,
) -> TriangleMesh:
    """Displace vertices by a random sum of low-frequency sinusoids.

    The displacement magnitude is ``amplitude`` times the bounding-box
    diagonal, so the result stays near-isometric for small amplitudes.
    """
    v = mesh.vertices
    diagonal = float(np.linalg.norm(v.max(axis=0) - v.min(axis=0)))
    centred = (v - v.mean(axis=0)) / max(diagonal, 1e-12)
    displacement = np.zeros_like(v)
    for _ in range(n_waves):
        direction = rng.normal(size=3)
        frequency = rng.uniform(1.0, 3.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        displacement += np.sin(frequency * np.pi * centred @ axis + phase)[:, None] * direction
    displacement *= amplitude * diagonal / max(n_waves, 1)
    return TriangleMesh(vertices=v + displacement, faces=mesh.faces)

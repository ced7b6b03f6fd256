"""Cotangent stiffness and barycentric lumped mass matrices.

W follows the positive semi-definite convention: off-diagonal entries are
-w_ij with w_ij = (cot α_ij + cot β_ij) / 2 summed over incident faces, and
the diagonal is minus the off-diagonal row sum. Boundary edges simply have a
single incident face.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from fmapforge.exceptions import DegenerateGeometry
from fmapforge.schema import LaplacianPair, TriangleMesh

COT_CLAMP = 1e4
AREA_FLOOR = 1e-12


def corner_cotangents(mesh: TriangleMesh) -> np.ndarray:
    """Return the clamped cotangent of every face corner as an (m, 3) array.

    Column c holds the cotangent of the angle at ``faces[:, c]``, which is
    opposite the edge (faces[:, c+1], faces[:, c+2]).
    """
    v, f = mesh.vertices, mesh.faces
    cot = np.empty(f.shape, dtype=np.float64)
    for corner in range(3):
        origin = v[f[:, corner]]
        a = v[f[:, (corner + 1) % 3]] - origin
        b = v[f[:, (corner + 2) % 3]] - origin
        dot = np.einsum("ij,ij->i", a, b)
        cross = np.linalg.norm(np.cross(a, b), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = dot / cross
        raw = np.where(cross > 0, raw, np.sign(dot) * COT_CLAMP)
        cot[:, corner] = np.clip(raw, -COT_CLAMP, COT_CLAMP)
    return cot


def build_laplacian(mesh: TriangleMesh) -> LaplacianPair:
    """Assemble the cotangent stiffness W and lumped mass M of a mesh.

    Args:
        mesh: A validated triangle mesh.

    Returns:
        LaplacianPair with W in CSR form and the diagonal of M.

    Raises:
        DegenerateGeometry: If a face area falls below 1e-12 × mean face area.
    """
    areas = mesh.face_areas()
    mean_area = float(areas.mean())
    small = np.flatnonzero(areas < AREA_FLOOR * mean_area) if mean_area > 0 else np.arange(1)
    if small.size:
        face = int(small[0])
        raise DegenerateGeometry(
            f"Face {face} has area {areas[face]:.3e} (mean {mean_area:.3e})",
            face=face,
            area=float(areas[face]),
        )

    f = mesh.faces
    n = mesh.n
    cot = corner_cotangents(mesh)

    # Corner c is opposite edge (c+1, c+2).
    rows = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    cols = np.concatenate([f[:, 2], f[:, 0], f[:, 1]])
    weights = 0.5 * np.concatenate([cot[:, 0], cot[:, 1], cot[:, 2]])

    ii = np.concatenate([rows, cols])
    jj = np.concatenate([cols, rows])
    off = sparse.coo_matrix(
        (np.concatenate([-weights, -weights]), (ii, jj)), shape=(n, n)
    ).tocsr()
    off.sum_duplicates()
    diagonal = -np.asarray(off.sum(axis=1)).ravel()
    stiffness = (off + sparse.diags(diagonal)).tocsr()
    stiffness.sort_indices()

    mass = np.bincount(f.ravel(), weights=np.repeat(areas / 3.0, 3), minlength=n)
    return LaplacianPair(stiffness=stiffness, mass=mass)


def row_sum_defect(lap: LaplacianPair) -> float:
    """Largest |row sum of W| relative to that row's absolute sum."""
    W = lap.stiffness
    sums = np.abs(np.asarray(W.sum(axis=1)).ravel())
    scale = np.asarray(abs(W).sum(axis=1)).ravel()
    scale[scale == 0] = 1.0
    return float(np.max(sums / scale))

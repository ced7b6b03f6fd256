"""Conversions between point-wise maps and functional maps.

Every nearest-neighbour search breaks ties toward the smallest target
index, for both the brute-force and the k-d tree backend.
"""

from __future__ import annotations

import logging
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.special import softmax

from fmapforge.exceptions import BasisMeshMismatch, DimensionMismatch, InvalidArgument
from fmapforge.schema import FeatureMatrix, FunctionalMap, PointMap, Provenance, SpectralBasis

logger = logging.getLogger(__name__)

CHUNK_ROWS = 1024
KDTREE_CANDIDATES = 8
DEFAULT_TOP_T = 32


class PointMapMode(str, Enum):
    """How to turn feature similarity into a point map."""

    HARD_NN = "hard"
    SOFTMAX = "softmax"


class NNBackend(str, Enum):
    """Nearest-neighbour search backend."""

    BRUTE = "brute"
    KDTREE = "kdtree"


def nearest_rows(
    queries: np.ndarray,
    targets: np.ndarray,
    backend: NNBackend | str = NNBackend.BRUTE,
) -> np.ndarray:
    """For each query row return the index of the closest target row.

    Distances are squared Euclidean; ties go to the smallest index.

    Args:
        queries: (q, d) array.
        targets: (t, d) array.
        backend: ``brute`` scans all targets in row chunks; ``kdtree``
            queries a few candidates and falls back to a scan when they tie.

    Returns:
        Length-q integer array.
    """
    queries = np.asarray(queries, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if queries.shape[1] != targets.shape[1]:
        raise DimensionMismatch(
            "Query and target dimensions differ",
            expected=targets.shape[1],
            actual=queries.shape[1],
        )
    if NNBackend(backend) is NNBackend.KDTREE:
        return _nearest_kdtree(queries, targets)
    return _nearest_brute(queries, targets)


def _nearest_brute(queries: np.ndarray, targets: np.ndarray) -> np.ndarray:
    out = np.empty(queries.shape[0], dtype=np.int64)
    for start in range(0, queries.shape[0], CHUNK_ROWS):
        block = cdist(queries[start : start + CHUNK_ROWS], targets, metric="sqeuclidean")
        out[start : start + CHUNK_ROWS] = np.argmin(block, axis=1)
    return out


def _nearest_kdtree(queries: np.ndarray, targets: np.ndarray) -> np.ndarray:
    count = min(KDTREE_CANDIDATES, targets.shape[0])
    _, candidates = cKDTree(targets).query(queries, k=count)
    candidates = np.asarray(candidates).reshape(queries.shape[0], count)
    exact = np.sum((targets[candidates] - queries[:, None, :]) ** 2, axis=2)
    best = exact.min(axis=1)
    out = np.empty(queries.shape[0], dtype=np.int64)
    for row in range(queries.shape[0]):
        tied = candidates[row][exact[row] == best[row]]
        if tied.size == count and count < targets.shape[0]:
            # Every candidate ties, so a smaller index may lie outside the candidate set.
            out[row] = _nearest_brute(queries[row : row + 1], targets)[0]
        else:
            out[row] = int(tied.min())
    return out


def pointmap_from_features(
    features_x: FeatureMatrix,
    features_y: FeatureMatrix,
    mode: PointMapMode | str = PointMapMode.HARD_NN,
    tau: float = 0.07,
    *,
    backend: NNBackend | str = NNBackend.BRUTE,
    top_t: int | None = None,
) -> PointMap:
    """Build the point map Π_YX from feature similarity.

    HardNN maps each Y row to the X row with minimal squared feature
    distance. Softmax returns the row-wise softmax of F_Y F_Xᵀ / τ, densely
    or keeping only the ``top_t`` largest logits per row.

    Args:
        features_x: F_X.
        features_y: F_Y.
        mode: HardNN or Softmax.
        tau: Softmax temperature.
        backend: Nearest-neighbour backend for HardNN.
        top_t: Row sparsity for Softmax, dense when None.

    Returns:
        A PointMap from Y to X.

    Raises:
        DimensionMismatch: If the feature dimensions differ.
    """
    if features_x.c != features_y.c:
        raise DimensionMismatch(
            "Feature dimensions differ", expected=features_x.c, actual=features_y.c
        )
    if PointMapMode(mode) is PointMapMode.HARD_NN:
        indices = nearest_rows(features_y.values, features_x.values, backend)
        return PointMap.hard(indices, n_target=features_x.n)

    if tau <= 0:
        raise InvalidArgument(f"tau must be positive, got {tau}")
    logits = features_y.values @ features_x.values.T / tau
    if top_t is None or top_t >= features_x.n:
        return PointMap.soft(softmax(logits, axis=1))
    return PointMap.soft(_top_t_softmax(logits, top_t))


def _top_t_softmax(logits: np.ndarray, top_t: int) -> sparse.csr_matrix:
    if top_t < 1:
        raise InvalidArgument(f"top_t must be positive, got {top_t}")
    n_rows, n_cols = logits.shape
    keep = np.argpartition(-logits, top_t - 1, axis=1)[:, :top_t]
    keep.sort(axis=1)
    kept_logits = np.take_along_axis(logits, keep, axis=1)
    weights = softmax(kept_logits, axis=1)
    indptr = np.arange(0, n_rows * top_t + 1, top_t)
    return sparse.csr_matrix((weights.ravel(), keep.ravel(), indptr), shape=(n_rows, n_cols))


def _check_bases(pi: PointMap, basis_x: SpectralBasis, basis_y: SpectralBasis) -> None:
    if pi.n_target != basis_x.n or pi.n_source != basis_y.n:
        raise BasisMeshMismatch(
            f"Point map is {pi.n_source} → {pi.n_target} but bases have "
            f"n_Y={basis_y.n}, n_X={basis_x.n}"
        )


def fmap_from_pointmap(
    pi: PointMap, basis_x: SpectralBasis, basis_y: SpectralBasis
) -> FunctionalMap:
    """Return C^Π = Φ_Y† Π Φ_X for a hard or soft map Π from Y to X.

    Raises:
        BasisMeshMismatch: If Π and the bases disagree on vertex counts.
    """
    _check_bases(pi, basis_x, basis_y)
    matrix = basis_y.phi_dagger @ pi.apply(basis_x.phi)
    return FunctionalMap(matrix=matrix, provenance=Provenance.CONVERTED)


def pointmap_from_fmap(
    fmap: FunctionalMap,
    basis_x: SpectralBasis,
    basis_y: SpectralBasis,
    backend: NNBackend | str = NNBackend.BRUTE,
) -> PointMap:
    """Recover a hard map Y → X by nearest neighbours in the spectral domain.

    Row y of Φ_Y C is matched to the closest row of Φ_X. Since Φ_Y C equals
    Π Φ_X whenever C = Φ_Y† Π Φ_X and the bases are complete, the round
    trip through :func:`fmap_from_pointmap` is exact at full rank.

    Raises:
        DimensionMismatch: If C does not match the basis sizes.
    """
    k_y, k_x = fmap.shape
    if k_y > basis_y.k or k_x > basis_x.k:
        raise DimensionMismatch(
            "Functional map exceeds the available bases",
            expected=(basis_y.k, basis_x.k),
            actual=fmap.shape,
        )
    queries = basis_y.phi[:, :k_y] @ fmap.matrix
    indices = nearest_rows(queries, basis_x.phi[:, :k_x], backend)
    return PointMap.hard(indices, n_target=basis_x.n)

"""Unsupervised functional-map losses and their gradients with respect to C.

All terms are squared Frobenius norms evaluated in float64. The
orthogonality term is the per-map form ‖C_XYᵀC_XY - I‖² + ‖C_YXᵀC_YX - I‖²,
each map measured against itself.
"""

from __future__ import annotations

import numpy as np
from scipy.special import softmax

from fmapforge.exceptions import (
    DimensionMismatch,
    InvalidArgument,
    NonFiniteLoss,
    ProvenanceMismatch,
)
from fmapforge.schema import (
    FeatureMatrix,
    FunctionalMap,
    LossReport,
    LossWeights,
    Provenance,
    SpectralBasis,
)

CONTRAST_CHUNK = 2048


def _as_matrix(fmap: FunctionalMap | np.ndarray) -> np.ndarray:
    if isinstance(fmap, FunctionalMap):
        return fmap.matrix
    return np.asarray(fmap, dtype=np.float64)


def _check_pair(c_xy: np.ndarray, c_yx: np.ndarray) -> None:
    if c_xy.ndim != 2 or c_yx.shape != c_xy.shape[::-1]:
        raise DimensionMismatch(
            "C_XY and C_YX must have transposed shapes",
            expected=c_xy.shape[::-1],
            actual=c_yx.shape,
        )


# ---------------------------------------------------------------------------
# Loss values
# ---------------------------------------------------------------------------


def loss_bijectivity(
    c_xy: FunctionalMap | np.ndarray, c_yx: FunctionalMap | np.ndarray
) -> float:
    """‖C_XY C_YX - I‖²_F + ‖C_YX C_XY - I‖²_F."""
    a, b = _as_matrix(c_xy), _as_matrix(c_yx)
    _check_pair(a, b)
    e1 = a @ b - np.eye(a.shape[0])
    e2 = b @ a - np.eye(b.shape[0])
    return float(np.sum(e1**2) + np.sum(e2**2))


def loss_orthogonality(
    c_xy: FunctionalMap | np.ndarray, c_yx: FunctionalMap | np.ndarray
) -> float:
    """‖C_XYᵀC_XY - I‖²_F + ‖C_YXᵀC_YX - I‖²_F."""
    a, b = _as_matrix(c_xy), _as_matrix(c_yx)
    _check_pair(a, b)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch("Orthogonality needs square maps", actual=a.shape)
    e1 = a.T @ a - np.eye(a.shape[1])
    e2 = b.T @ b - np.eye(b.shape[1])
    return float(np.sum(e1**2) + np.sum(e2**2))


def loss_coupling(solved: FunctionalMap, converted: FunctionalMap) -> float:
    """‖C - C^Π‖²_F between a solved map and one converted from a point map.

    Raises:
        ProvenanceMismatch: If the arguments have the wrong provenance.
        DimensionMismatch: If the shapes differ.
    """
    if solved.provenance is not Provenance.SOLVED:
        raise ProvenanceMismatch("First argument of the coupling loss must be a solved map")
    if converted.provenance is not Provenance.CONVERTED:
        raise ProvenanceMismatch("Second argument of the coupling loss must be a converted map")
    if solved.shape != converted.shape:
        raise DimensionMismatch(
            "Coupled maps differ in shape", expected=solved.shape, actual=converted.shape
        )
    return float(np.sum((solved.matrix - converted.matrix) ** 2))


def soft_self_map_fmap(features: FeatureMatrix, basis: SpectralBasis, tau: float) -> np.ndarray:
    """Return C_XX = Φ† Softmax(F Fᵀ / τ) Φ, accumulated over row chunks."""
    if tau <= 0:
        raise InvalidArgument(f"tau must be positive, got {tau}")
    if features.n != basis.n:
        raise DimensionMismatch(
            "Features and basis live on different meshes", expected=basis.n, actual=features.n
        )
    F = features.values
    result = np.zeros((basis.k, basis.k))
    for start in range(0, F.shape[0], CONTRAST_CHUNK):
        stop = start + CONTRAST_CHUNK
        rows = softmax(F[start:stop] @ F.T / tau, axis=1)
        result += basis.phi_dagger[:, start:stop] @ (rows @ basis.phi)
    return result


def loss_contrastive(features: FeatureMatrix, basis: SpectralBasis, tau: float) -> float:
    """‖Φ† Softmax(F Fᵀ / τ) Φ - I‖²_F for the soft self-map of one shape."""
    c_xx = soft_self_map_fmap(features, basis, tau)
    return float(np.sum((c_xx - np.eye(basis.k)) ** 2))


def loss_report(
    c_xy: FunctionalMap | np.ndarray,
    c_yx: FunctionalMap | np.ndarray,
    coupled_xy: np.ndarray,
    coupled_yx: np.ndarray,
    contrast_x: float,
    contrast_y: float,
    weights: LossWeights,
) -> LossReport:
    """Evaluate every term for one pair with coupling in both directions."""
    a, b = _as_matrix(c_xy), _as_matrix(c_yx)
    couple = float(np.sum((a - coupled_xy) ** 2) + np.sum((b - coupled_yx) ** 2))
    bij = loss_bijectivity(a, b)
    orth = loss_orthogonality(a, b)
    terms = (bij, orth, couple, contrast_x, contrast_y)
    if not all(np.isfinite(terms)):
        raise NonFiniteLoss(f"Non-finite loss terms {terms}")
    return LossReport.from_terms(
        bij=bij,
        orth=orth,
        couple=couple,
        contrast_x=contrast_x,
        contrast_y=contrast_y,
        weights=weights,
    )


# ---------------------------------------------------------------------------
# Gradients with respect to the maps
# ---------------------------------------------------------------------------


def bijectivity_gradients(c_xy: np.ndarray, c_yx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (∂/∂C_XY, ∂/∂C_YX) of the bijectivity loss."""
    e1 = c_xy @ c_yx - np.eye(c_xy.shape[0])
    e2 = c_yx @ c_xy - np.eye(c_yx.shape[0])
    d_xy = 2.0 * e1 @ c_yx.T + 2.0 * c_yx.T @ e2
    d_yx = 2.0 * c_xy.T @ e1 + 2.0 * e2 @ c_xy.T
    return d_xy, d_yx


def orthogonality_gradient(c: np.ndarray) -> np.ndarray:
    """∂/∂C of ‖CᵀC - I‖²_F."""
    return 4.0 * c @ (c.T @ c - np.eye(c.shape[1]))


def pair_loss_gradients(
    c_xy: np.ndarray,
    c_yx: np.ndarray,
    coupled_xy: np.ndarray,
    coupled_yx: np.ndarray,
    weights: LossWeights,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the weighted total with respect to (C_XY, C_YX).

    Contrastive terms do not depend on the solved maps.
    """
    bij_xy, bij_yx = bijectivity_gradients(c_xy, c_yx)
    g_xy = (
        weights.bij * bij_xy
        + weights.orth * orthogonality_gradient(c_xy)
        + weights.couple * 2.0 * (c_xy - coupled_xy)
    )
    g_yx = (
        weights.bij * bij_yx
        + weights.orth * orthogonality_gradient(c_yx)
        + weights.couple * 2.0 * (c_yx - coupled_yx)
    )
    return g_xy, g_yx

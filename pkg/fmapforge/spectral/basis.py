"""Truncated Laplace–Beltrami eigenbasis.

Solves the generalized problem W φ = λ M φ for the k smallest eigenpairs.
Small problems use a dense symmetric solver; larger ones use ARPACK in
shift-invert mode with a shift slightly below zero, so W - σM stays
positive definite and the factorisation never hits the null mode.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as sparse_linalg

from fmapforge.exceptions import ConvergenceFailure, DimensionMismatch, InvalidArgument, KTooLarge
from fmapforge.schema import LaplacianPair, SpectralBasis

logger = logging.getLogger(__name__)

DENSE_LIMIT = 400
RESIDUAL_TOL = 1e-8
ORTHO_TOL = 1e-10
SIGN_TOL = 1e-10
SHIFT_FRACTION = 1e-6


def compute_basis(lap: LaplacianPair, k: int, *, dense: bool | None = None) -> SpectralBasis:
    """Compute the k smallest generalized eigenpairs of (W, M).

    Eigenvalues are returned ascending and clamped at zero; each eigenvector
    is sign-normalised so its first entry above noise level is positive.

    Args:
        lap: Stiffness/mass pair.
        k: Number of eigenpairs, ``1 <= k < n``.
        dense: Force (True) or forbid (False) the dense solver; chosen by
            size when None.

    Returns:
        An M-orthonormal SpectralBasis.

    Raises:
        KTooLarge: If ``k >= n``.
        ConvergenceFailure: If ARPACK fails or the residual check fails.
    """
    n = lap.n
    if k < 1:
        raise InvalidArgument(f"k must be positive, got {k}")
    if k >= n:
        raise KTooLarge(f"Requested k={k} eigenpairs on a mesh with n={n} vertices")

    use_dense = dense if dense is not None else (n <= DENSE_LIMIT or k >= n - 1)
    if use_dense:
        evals, phi = _dense_eigenpairs(lap, k)
    else:
        evals, phi = _sparse_eigenpairs(lap, k)

    order = np.argsort(evals, kind="stable")
    evals, phi = evals[order], phi[:, order]
    evals = np.maximum(evals, 0.0)
    phi = _m_orthonormalize(phi, lap.mass)
    phi = _fix_signs(phi)
    _check_residual(lap, phi, evals)
    return SpectralBasis(phi=phi, evals=evals, mass=lap.mass)


def project(basis: SpectralBasis, f: np.ndarray) -> np.ndarray:
    """Return the spectral coefficients Φ†f of per-vertex functions.

    Args:
        basis: Spectral basis of the mesh ``f`` lives on.
        f: (n,) or (n, c) array.

    Returns:
        (k,) or (k, c) coefficient array.

    Raises:
        DimensionMismatch: If ``f`` does not have n rows.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != basis.n:
        raise DimensionMismatch(
            "Function rows must match the vertex count", expected=basis.n, actual=f.shape[0]
        )
    return np.asarray(basis.phi_dagger @ f)


def _dense_eigenpairs(lap: LaplacianPair, k: int) -> tuple[np.ndarray, np.ndarray]:
    W = lap.stiffness.toarray()
    W = 0.5 * (W + W.T)
    try:
        evals, phi = linalg.eigh(W, np.diag(lap.mass), subset_by_index=[0, k - 1])
    except linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"Dense eigensolver failed: {exc}") from exc
    return evals, phi


def _sparse_eigenpairs(lap: LaplacianPair, k: int) -> tuple[np.ndarray, np.ndarray]:
    W = lap.stiffness.tocsc()
    scale = float(np.max(np.abs(W.diagonal()) / lap.mass))
    sigma = -SHIFT_FRACTION * max(scale, 1.0)
    logger.debug("Shift-invert eigsh with k=%d, sigma=%.3e", k, sigma)
    try:
        evals, phi = sparse_linalg.eigsh(
            W, k=k, M=sparse.diags(lap.mass).tocsc(), sigma=sigma, which="LM"
        )
    except sparse_linalg.ArpackNoConvergence as exc:
        raise ConvergenceFailure(
            f"ARPACK converged {len(exc.eigenvalues)} of {k} eigenpairs"
        ) from exc
    except sparse_linalg.ArpackError as exc:
        raise ConvergenceFailure(f"ARPACK failed: {exc}") from exc
    return evals, phi


def _m_orthonormalize(phi: np.ndarray, mass: np.ndarray) -> np.ndarray:
    """Re-orthonormalise inside near-degenerate eigenspaces if needed."""
    gram = phi.T @ (phi * mass[:, None])
    if np.max(np.abs(gram - np.eye(phi.shape[1]))) <= ORTHO_TOL:
        return phi
    chol = linalg.cholesky(gram, lower=True)
    return np.asarray(linalg.solve_triangular(chol, phi.T, lower=True).T)


def _fix_signs(phi: np.ndarray) -> np.ndarray:
    phi = phi.copy()
    for col in range(phi.shape[1]):
        column = phi[:, col]
        threshold = SIGN_TOL * np.max(np.abs(column))
        first = int(np.argmax(np.abs(column) > threshold))
        if column[first] < 0:
            phi[:, col] = -column
    return phi


def _check_residual(lap: LaplacianPair, phi: np.ndarray, evals: np.ndarray) -> None:
    W = lap.stiffness
    residual = W @ phi - (phi * lap.mass[:, None]) * evals[None, :]
    per_column = np.linalg.norm(residual, axis=0)
    bound = RESIDUAL_TOL * sparse_linalg.norm(W)
    worst = int(np.argmax(per_column))
    if per_column[worst] > bound:
        raise ConvergenceFailure(
            f"Eigen-residual {per_column[worst]:.3e} for pair {worst} exceeds {bound:.3e}"
        )

"""Structural penalty masks on functional-map entries.

Both masks vanish exactly where the compared eigenvalues coincide. The
resolvent mask maps each eigenvalue Λ through p = Λ^γ onto the pair
(p / (p² + 1), 1 / (p² + 1)) and penalises the squared distance between
the two shapes' pairs, which gives a funnel-shaped pattern whose opening
is controlled by γ.
"""

from __future__ import annotations

import numpy as np

from fmapforge.exceptions import DimensionMismatch, GammaOutOfRange, InvalidArgument
from fmapforge.schema import MaskKind, MaskMatrix


def _check_spectrum(evals: np.ndarray, name: str) -> np.ndarray:
    evals = np.asarray(evals, dtype=np.float64)
    if evals.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector", actual=evals.shape)
    if np.any(evals < 0) or not np.all(np.isfinite(evals)):
        raise InvalidArgument(f"{name} must be finite and non-negative")
    return evals


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma <= 1.0:
        raise GammaOutOfRange(f"gamma must lie in (0, 1], got {gamma}")


def mask_standard(evals_x: np.ndarray, evals_y: np.ndarray) -> MaskMatrix:
    """Laplacian-commutativity mask, entry[i][j] = (Λ_Y[i] - Λ_X[j])²."""
    lam_x = _check_spectrum(evals_x, "evals_x")
    lam_y = _check_spectrum(evals_y, "evals_y")
    entries = (lam_y[:, None] - lam_x[None, :]) ** 2
    return MaskMatrix(entries=entries, kind=MaskKind.STANDARD)


def _resolvent_parts(evals: np.ndarray, gamma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (p, real part, imaginary part) with 0^γ taken as 0."""
    p = np.zeros_like(evals)
    positive = evals > 0
    p[positive] = evals[positive] ** gamma
    denom = p**2 + 1.0
    return p, p / denom, 1.0 / denom


def mask_resolvent(evals_x: np.ndarray, evals_y: np.ndarray, gamma: float) -> MaskMatrix:
    """Resolvent mask with shape parameter γ ∈ (0, 1].

    Raises:
        GammaOutOfRange: If γ is outside (0, 1].
    """
    _check_gamma(gamma)
    lam_x = _check_spectrum(evals_x, "evals_x")
    lam_y = _check_spectrum(evals_y, "evals_y")
    _, re_x, im_x = _resolvent_parts(lam_x, gamma)
    _, re_y, im_y = _resolvent_parts(lam_y, gamma)
    entries = (re_y[:, None] - re_x[None, :]) ** 2 + (im_y[:, None] - im_x[None, :]) ** 2
    return MaskMatrix(entries=entries, kind=MaskKind.RESOLVENT, gamma=gamma)


def _resolvent_part_derivatives(
    evals: np.ndarray, gamma: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    p, re, im = _resolvent_parts(evals, gamma)
    dp = np.zeros_like(evals)
    positive = evals > 0
    dp[positive] = p[positive] * np.log(evals[positive])
    denom_sq = (p**2 + 1.0) ** 2
    d_re = (1.0 - p**2) / denom_sq * dp
    d_im = -2.0 * p / denom_sq * dp
    return re, im, d_re, d_im


def mask_gamma_derivative(
    kind: MaskKind, evals_x: np.ndarray, evals_y: np.ndarray, gamma: float
) -> np.ndarray:
    """Entrywise derivative of the mask with respect to γ.

    The standard mask does not depend on γ, so its derivative is zero.
    """
    lam_x = _check_spectrum(evals_x, "evals_x")
    lam_y = _check_spectrum(evals_y, "evals_y")
    if MaskKind(kind) is MaskKind.STANDARD:
        return np.zeros((lam_y.size, lam_x.size))
    _check_gamma(gamma)
    re_x, im_x, dre_x, dim_x = _resolvent_part_derivatives(lam_x, gamma)
    re_y, im_y, dre_y, dim_y = _resolvent_part_derivatives(lam_y, gamma)
    return 2.0 * (re_y[:, None] - re_x[None, :]) * (dre_y[:, None] - dre_x[None, :]) + 2.0 * (
        im_y[:, None] - im_x[None, :]
    ) * (dim_y[:, None] - dim_x[None, :])


def build_mask(
    kind: MaskKind | str, evals_x: np.ndarray, evals_y: np.ndarray, gamma: float
) -> MaskMatrix:
    """Build a mask of the requested kind (γ is ignored for the standard mask)."""
    if MaskKind(kind) is MaskKind.STANDARD:
        return mask_standard(evals_x, evals_y)
    return mask_resolvent(evals_x, evals_y, gamma)


def band_contrast(mask: MaskMatrix, width: int = 1) -> tuple[float, float]:
    """Mean of the diagonal band |i - j| < width and mean of its complement."""
    rows, cols = np.indices(mask.shape)
    band = np.abs(rows - cols) < width
    return float(mask.entries[band].mean()), float(mask.entries[~band].mean())

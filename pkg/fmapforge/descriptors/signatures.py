"""Heat and wave kernel signatures computed from a spectral basis.

Both descriptors are intrinsic: they depend on the mesh only through
(Φ, Λ), so rigid motions leave them unchanged and vertex relabelings
permute their rows. Every output column has unit M-weighted norm.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from fmapforge.exceptions import DegenerateSpectrum, InvalidArgument
from fmapforge.schema import FeatureMatrix, SpectralBasis

ZERO_MODE_TOL = 1e-8
DEFAULT_WKS_ENERGIES = 128
DEFAULT_VARIANCE_SCALE = 7.0


class DescriptorKind(str, Enum):
    """Built-in descriptor families."""

    WKS = "wks"
    HKS = "hks"


def nonzero_modes(basis: SpectralBasis) -> np.ndarray:
    """Indices of eigenvalues above 1e-8 × the largest eigenvalue.

    Raises:
        DegenerateSpectrum: If fewer than two modes qualify.
    """
    evals = basis.evals
    lam_max = float(evals.max()) if evals.size else 0.0
    modes = np.flatnonzero(evals > ZERO_MODE_TOL * lam_max) if lam_max > 0 else np.array([], int)
    if modes.size < 2:
        raise DegenerateSpectrum(
            f"Need at least 2 nonzero eigenvalues, found {modes.size} among k={basis.k}"
        )
    return modes


def hks_times(basis: SpectralBasis, num_times: int) -> np.ndarray:
    """Log-spaced diffusion times in [4 ln10 / Λ_max, 4 ln10 / Λ_min-nonzero]."""
    modes = nonzero_modes(basis)
    lam = basis.evals[modes]
    return np.geomspace(4.0 * np.log(10.0) / lam[-1], 4.0 * np.log(10.0) / lam[0], num_times)


def hks(basis: SpectralBasis, num_times: int, *, times: np.ndarray | None = None) -> FeatureMatrix:
    """Heat kernel signature HKS(x, t) = Σ_i exp(-Λ_i t) Φ[x, i]².

    Args:
        basis: Spectral basis.
        num_times: Number of diffusion times (columns).
        times: Explicit diffusion times; overrides the log-spaced default grid.

    Returns:
        FeatureMatrix with one M-normalised column per diffusion time.

    Raises:
        InvalidArgument: If ``num_times < 1`` or a time is not positive and finite.
        DegenerateSpectrum: If the default grid is used with fewer than 2 nonzero eigenvalues.
    """
    if times is None:
        if num_times < 1:
            raise InvalidArgument(f"num_times must be positive, got {num_times}")
        times = hks_times(basis, num_times)
    else:
        times = np.asarray(times, dtype=np.float64).reshape(-1)
        if times.size == 0 or not np.all(np.isfinite(times) & (times > 0)):
            raise InvalidArgument("Diffusion times must be positive and finite")
    values = (basis.phi**2) @ np.exp(-np.outer(basis.evals, times))
    return FeatureMatrix.from_values(normalize_columns(values, basis.mass), basis)


def wks_energies(
    basis: SpectralBasis, num_energies: int, variance_scale: float
) -> tuple[np.ndarray, float]:
    """Return the log-energy samples and the Gaussian width σ."""
    modes = nonzero_modes(basis)
    log_lam = np.log(basis.evals[modes])
    e_min, e_max = float(log_lam[0]), float(log_lam[-1])
    sigma = variance_scale * (e_max - e_min) / num_energies
    if sigma <= 0:
        raise DegenerateSpectrum("Nonzero eigenvalues span an empty log range")
    return np.linspace(e_min + 2.0 * sigma, e_max - 2.0 * sigma, num_energies), sigma


def wks(
    basis: SpectralBasis,
    num_energies: int = DEFAULT_WKS_ENERGIES,
    variance_scale: float = DEFAULT_VARIANCE_SCALE,
) -> FeatureMatrix:
    """Wave kernel signature over the nonzero modes of ``basis``.

    WKS(x, e) = Σ_i g_i(e) Φ[x, i]² / Σ_i g_i(e) with
    g_i(e) = exp(-(e - ln Λ_i)² / (2σ²)) and σ = variance_scale · range / N.

    Args:
        basis: Spectral basis.
        num_energies: Number of energy samples (columns).
        variance_scale: Gaussian width in units of the energy spacing.

    Returns:
        FeatureMatrix with ``num_energies`` M-normalised columns.

    Raises:
        InvalidArgument: If an argument is out of range.
        DegenerateSpectrum: If fewer than 2 nonzero eigenvalues exist.
    """
    if num_energies < 1:
        raise InvalidArgument(f"num_energies must be positive, got {num_energies}")
    if variance_scale <= 0:
        raise InvalidArgument(f"variance_scale must be positive, got {variance_scale}")
    energies, sigma = wks_energies(basis, num_energies, variance_scale)
    modes = nonzero_modes(basis)
    log_lam = np.log(basis.evals[modes])
    weights = np.exp(-((energies[None, :] - log_lam[:, None]) ** 2) / (2.0 * sigma**2))
    values = (basis.phi[:, modes] ** 2) @ weights / weights.sum(axis=0)[None, :]
    return FeatureMatrix.from_values(normalize_columns(values, basis.mass), basis)


def normalize_columns(values: np.ndarray, mass: np.ndarray) -> np.ndarray:
    """Scale each column to unit M-weighted norm sqrt(Σ_x m_x f_x²)."""
    norms = np.sqrt(mass @ values**2)
    if np.any(norms == 0):
        raise DegenerateSpectrum("A descriptor column vanished on every vertex")
    return values / norms[None, :]


def compute_descriptor(
    basis: SpectralBasis,
    kind: DescriptorKind | str = DescriptorKind.WKS,
    size: int = DEFAULT_WKS_ENERGIES,
    variance_scale: float = DEFAULT_VARIANCE_SCALE,
) -> FeatureMatrix:
    """Dispatch to :func:`wks` or :func:`hks` by name."""
    kind = DescriptorKind(kind)
    if kind is DescriptorKind.HKS:
        return hks(basis, size)
    return wks(basis, size, variance_scale)

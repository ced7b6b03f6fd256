"""Spectral upsampling refinement of a functional map."""

from __future__ import annotations

import logging

from fmapforge.conversion.pointmaps import NNBackend, fmap_from_pointmap, pointmap_from_fmap
from fmapforge.exceptions import BasisTooSmall, DimensionMismatch, InvalidArgument
from fmapforge.schema import FunctionalMap, PointMap, SpectralBasis

logger = logging.getLogger(__name__)


def refine_spectral_upsampling(
    initial: FunctionalMap,
    basis_x: SpectralBasis,
    basis_y: SpectralBasis,
    k_start: int,
    k_end: int,
    step: int = 1,
    backend: NNBackend | str = NNBackend.BRUTE,
) -> tuple[FunctionalMap, PointMap]:
    """Alternate point-map recovery and conversion while growing k.

    Each iteration grows k by ``step`` (clamped to ``k_end``) and sets C to
    fmap_from_pointmap of the previous point map at the new size.

    Args:
        initial: k_start × k_start starting map.
        basis_x: Basis of X with at least ``k_end`` eigenpairs.
        basis_y: Basis of Y with at least ``k_end`` eigenpairs.
        k_start: Size of ``initial``.
        k_end: Final size.
        step: Growth per iteration.
        backend: Nearest-neighbour backend.

    Returns:
        (k_end × k_end map, its hard point map).

    Raises:
        BasisTooSmall: If ``k_end`` exceeds either basis.
        InvalidArgument: If the sizes are inconsistent.
    """
    if step < 1:
        raise InvalidArgument(f"step must be positive, got {step}")
    if not 1 <= k_start <= k_end:
        raise InvalidArgument(f"Need 1 <= k_start <= k_end, got {k_start} and {k_end}")
    available = min(basis_x.k, basis_y.k)
    if k_end > available:
        raise BasisTooSmall(f"k_end={k_end} exceeds the available basis size {available}")
    if initial.shape != (k_start, k_start):
        raise DimensionMismatch(
            "Initial map must be k_start × k_start",
            expected=(k_start, k_start),
            actual=initial.shape,
        )

    fmap = initial
    pi = pointmap_from_fmap(fmap, basis_x, basis_y, backend)
    k = k_start
    while k < k_end:
        k = min(k + step, k_end)
        fmap = fmap_from_pointmap(pi, basis_x.truncate(k), basis_y.truncate(k))
        pi = pointmap_from_fmap(fmap, basis_x, basis_y, backend)
        logger.debug("Upsampled functional map to k=%d", k)
    return fmap, pi

"""On-disk cache of spectral bases keyed by mesh content hash and k."""

from __future__ import annotations

import logging
from pathlib import Path

from fmapforge.exceptions import ParseError
from fmapforge.mesh.laplacian import build_laplacian
from fmapforge.schema import LaplacianPair, SpectralBasis, TriangleMesh
from fmapforge.spectral.basis import compute_basis
from fmapforge.utils.arrays import load_arrays, save_arrays

logger = logging.getLogger(__name__)

CACHE_KIND = "basis"
CACHE_SUFFIX = ".fmb"


class BasisCache:
    """Directory of cached (Φ, Λ, M) triples.

    One file per (mesh hash, k). A file that fails to decode, or whose
    shapes disagree with the mesh, is treated as a miss and overwritten.
    """

    def __init__(self, directory: str | Path) -> None:
        """Create a cache rooted at ``directory`` (created lazily on write)."""
        self.directory = Path(directory)

    def path_for(self, mesh: TriangleMesh, k: int) -> Path:
        """Return the cache file path for a mesh and basis size."""
        return self.directory / f"{mesh.content_hash()[:24]}_k{k}{CACHE_SUFFIX}"

    def load(self, mesh: TriangleMesh, k: int) -> SpectralBasis | None:
        """Return the cached basis, or None on a miss or a corrupt entry."""
        path = self.path_for(mesh, k)
        if not path.exists():
            return None
        try:
            (evals, phi, mass), _ = load_arrays(path, CACHE_KIND)
            if phi.shape != (mesh.n, k) or evals.shape != (k,) or mass.shape != (mesh.n,):
                raise ParseError("Cached shapes do not match the mesh", path=path)
        except (ParseError, ValueError) as exc:
            logger.warning("Ignoring corrupt basis cache %s (%s); recomputing", path, exc)
            return None
        return SpectralBasis(phi=phi, evals=evals, mass=mass)

    def store(self, mesh: TriangleMesh, basis: SpectralBasis) -> Path:
        """Write ``basis`` for ``mesh`` and return the file path."""
        path = self.path_for(mesh, basis.k)
        return save_arrays(path, CACHE_KIND, [basis.evals, basis.phi, basis.mass])

    def get_or_compute(
        self,
        mesh: TriangleMesh,
        k: int,
        lap: LaplacianPair | None = None,
    ) -> tuple[SpectralBasis, bool]:
        """Return (basis, hit) computing and storing it on a miss.

        Args:
            mesh: Mesh to decompose.
            k: Basis size.
            lap: Precomputed Laplacian, built from ``mesh`` when omitted.

        Returns:
            The basis and whether it came from the cache.
        """
        cached = self.load(mesh, k)
        if cached is not None:
            logger.debug("Basis cache hit for %s", self.path_for(mesh, k).name)
            return cached, True
        basis = compute_basis(lap if lap is not None else build_laplacian(mesh), k)
        self.store(mesh, basis)
        return basis, False

    def entries(self) -> list[Path]:
        """List cache files, sorted by name."""
        if not self.directory.exists():
            return []
        return sorted(self.directory.glob(f"*{CACHE_SUFFIX}"))


def basis_for(
    mesh: TriangleMesh, k: int, cache: BasisCache | None = None
) -> tuple[LaplacianPair, SpectralBasis]:
    """Build the Laplacian of ``mesh`` and its k-basis, via ``cache`` if given."""
    lap = build_laplacian(mesh)
    if cache is None:
        return lap, compute_basis(lap, k)
    basis, _ = cache.get_or_compute(mesh, k, lap=lap)
    return lap, basis

"""Shared test fixtures for FmapForge test suite."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from fmapforge.mesh.primitives import bumpy_sphere, octahedron, tetrahedron
from fmapforge.schema import SpectralBasis, TriangleMesh

FIXTURES_DIR = Path(__file__).parent / "fixtures"
MESH_FIXTURES_DIR = FIXTURES_DIR / "meshes"


def random_coefficients(
    rng: np.random.Generator, k: int, c: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return (A_X, A_Y, Λ_X, Λ_Y) for a random well-conditioned solver instance.

    Spectra start with a zero eigenvalue and grow roughly linearly, like a
    closed surface's; Λ_Y is a small perturbation of Λ_X.
    """
    coeffs_x = rng.standard_normal((k, c))
    coeffs_y = rng.standard_normal((k, c))
    evals_x = np.concatenate([[0.0], np.sort(rng.uniform(0.5, 1.5, k - 1).cumsum())])
    evals_y = evals_x * (1.0 + 0.05 * rng.uniform(-1.0, 1.0, k))
    evals_y[0] = 0.0
    return coeffs_x, coeffs_y, evals_x, np.sort(evals_y)


def unit_basis(n: int, k: int) -> SpectralBasis:
    """An M-orthonormal basis of the first k standard vectors with unit mass."""
    phi = np.eye(n)[:, :k]
    return SpectralBasis(phi=phi, evals=np.arange(k, dtype=np.float64), mass=np.ones(n))


@pytest.fixture()
def fixtures_dir() -> Path:
    """Return the path to the test fixtures directory."""
    return FIXTURES_DIR


@pytest.fixture()
def meshes_dir() -> Path:
    """Return the path to the mesh fixture files."""
    return MESH_FIXTURES_DIR


@pytest.fixture()
def right_triangle() -> TriangleMesh:
    """Unit right triangle with legs along x and y."""
    return TriangleMesh(
        vertices=np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
        faces=np.array([[0, 1, 2]]),
    )


@pytest.fixture()
def octa() -> TriangleMesh:
    """Regular octahedron, vertices ±x, ±y, ±z."""
    return octahedron()


@pytest.fixture()
def tetra() -> TriangleMesh:
    """Regular tetrahedron."""
    return tetrahedron()


@pytest.fixture()
def small_sphere() -> TriangleMesh:
    """Asymmetric bumpy sphere with 162 vertices."""
    return bumpy_sphere(subdivisions=2)


@pytest.fixture()
def rng() -> np.random.Generator:
    """Seeded random generator."""
    return np.random.default_rng(0)


@pytest.fixture()
def isolated_config(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Point config and cache locations into ``tmp_path`` and clear FMAPFORGE_* vars."""
    import fmapforge.config.settings as settings_mod

    config_dir = tmp_path / ".fmapforge"
    monkeypatch.setattr(settings_mod, "CONFIG_DIR", config_dir)
    monkeypatch.setattr(settings_mod, "CONFIG_FILE", config_dir / "config.yaml")
    for var in ("FMAPFORGE_K", "FMAPFORGE_MASK", "FMAPFORGE_JOBS"):
        monkeypatch.delenv(var, raising=False)
    monkeypatch.setenv("FMAPFORGE_CACHE_DIR", str(tmp_path / "cache"))
    return config_dir

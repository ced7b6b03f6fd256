"""Unit tests for mesh I/O, the cotangent Laplacian, geodesics and procedural meshes."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from fmapforge.exceptions import (
    DegenerateGeometry,
    DegenerateMesh,
    DisconnectedMesh,
    InvalidArgument,
    ParseError,
)
from fmapforge.mesh.geodesics import GeodesicOracle, geodesic_distances
from fmapforge.mesh.io import load_correspondence, load_mesh, save_mesh
from fmapforge.mesh.laplacian import build_laplacian, row_sum_defect
from fmapforge.mesh.primitives import (
    BUNDLED_MESHES,
    bundled_mesh,
    grid,
    icosphere,
    octahedron,
)
from fmapforge.mesh.transforms import permuted_copy, rigid_transform, scale, smooth_deformation
from fmapforge.schema import TriangleMesh

# ---------------------------------------------------------------------------
# Mesh files
# ---------------------------------------------------------------------------


class TestLoadMesh:
    """Tests for the OFF/OBJ/PLY readers."""

    def test_off_with_comment(self, meshes_dir: Path) -> None:
        """Comment lines are skipped."""
        mesh = load_mesh(meshes_dir / "right_triangle.off")
        assert mesh.n == 3
        np.testing.assert_array_equal(mesh.faces, [[0, 1, 2]])

    def test_off_counts_on_header_line(self, meshes_dir: Path) -> None:
        """'OFF 4 4 6' carries the counts inline."""
        mesh = load_mesh(meshes_dir / "tetrahedron.off")
        assert mesh.n == 4
        assert mesh.n_faces == 4

    def test_obj_matches_octahedron(self, meshes_dir: Path) -> None:
        """1-based, slashed and negative OBJ indices all resolve."""
        mesh = load_mesh(meshes_dir / "octahedron.obj")
        reference = octahedron()
        np.testing.assert_array_equal(mesh.vertices, reference.vertices)
        np.testing.assert_array_equal(mesh.faces, reference.faces)

    def test_ply_quad_is_fanned(self, meshes_dir: Path) -> None:
        """A quad face becomes two triangles; extra properties are ignored."""
        mesh = load_mesh(meshes_dir / "quad.ply")
        np.testing.assert_array_equal(mesh.faces, [[0, 1, 2], [0, 2, 3]])
        assert mesh.vertices[2].tolist() == [1.0, 1.0, 0.0]

    def test_bad_index(self, meshes_dir: Path) -> None:
        """Out-of-range face index is a degenerate mesh."""
        with pytest.raises(DegenerateMesh):
            load_mesh(meshes_dir / "bad_index.off")

    def test_truncated(self, meshes_dir: Path) -> None:
        """Files ending before the declared counts fail with a line number."""
        with pytest.raises(ParseError, match="ends early") as info:
            load_mesh(meshes_dir / "truncated.off")
        assert info.value.line is not None

    def test_missing_file(self, tmp_path: Path) -> None:
        """A missing file is a parse error."""
        with pytest.raises(ParseError, match="not found"):
            load_mesh(tmp_path / "nope.off")

    def test_unknown_format(self, tmp_path: Path) -> None:
        """Unknown suffixes are rejected."""
        path = tmp_path / "mesh.stl"
        path.write_text("solid\n")
        with pytest.raises(ParseError, match="Unknown mesh format"):
            load_mesh(path)

    def test_explicit_format_overrides_suffix(self, meshes_dir: Path, tmp_path: Path) -> None:
        """format= wins over the file suffix."""
        path = tmp_path / "mesh.txt"
        path.write_text((meshes_dir / "right_triangle.off").read_text())
        assert load_mesh(path, format="off").n == 3

    def test_non_numeric_vertex(self, tmp_path: Path) -> None:
        """Garbage coordinates report their line."""
        path = tmp_path / "bad.off"
        path.write_text("OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n")
        with pytest.raises(ParseError) as info:
            load_mesh(path)
        assert info.value.line == 4


class TestSaveMesh:
    """Tests for the mesh writers."""

    @pytest.mark.parametrize("suffix", [".off", ".obj"])
    def test_write_then_read(self, tmp_path: Path, octa: TriangleMesh, suffix: str) -> None:
        """Written meshes read back identically."""
        path = save_mesh(octa, tmp_path / f"octa{suffix}")
        loaded = load_mesh(path)
        np.testing.assert_array_equal(loaded.vertices, octa.vertices)
        np.testing.assert_array_equal(loaded.faces, octa.faces)

    def test_ply_not_writable(self, tmp_path: Path, octa: TriangleMesh) -> None:
        """PLY output is unsupported."""
        with pytest.raises(ParseError):
            save_mesh(octa, tmp_path / "octa.ply")


class TestLoadCorrespondence:
    """Tests for ground-truth index files."""

    def test_reads_indices(self, tmp_path: Path) -> None:
        """One index per line, comments allowed."""
        path = tmp_path / "gt.txt"
        path.write_text("# gt\n2\n0\n\n1\n")
        np.testing.assert_array_equal(load_correspondence(path), [2, 0, 1])

    def test_negative_index(self, tmp_path: Path) -> None:
        """Negative indices are rejected."""
        path = tmp_path / "gt.txt"
        path.write_text("0\n-1\n")
        with pytest.raises(ParseError, match="Negative"):
            load_correspondence(path)


# ---------------------------------------------------------------------------
# Laplacian
# ---------------------------------------------------------------------------


class TestLaplacian:
    """Tests for cotangent stiffness and lumped mass."""

    def test_right_triangle_weights(self, right_triangle: TriangleMesh) -> None:
        """Legs get weight 1/2, the hypotenuse (opposite the right angle) 0."""
        W = build_laplacian(right_triangle).stiffness.toarray()
        assert W[0, 1] == pytest.approx(-0.5)
        assert W[0, 2] == pytest.approx(-0.5)
        assert W[1, 2] == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(np.diag(W), [1.0, 0.5, 0.5])

    def test_right_triangle_mass(self, right_triangle: TriangleMesh) -> None:
        """Each vertex gets a third of the face area."""
        np.testing.assert_allclose(build_laplacian(right_triangle).mass, np.full(3, 1.0 / 6.0))

    def test_octahedron_weights(self, octa: TriangleMesh) -> None:
        """Equilateral faces give weight cot 60° = 1/√3 on every edge."""
        lap = build_laplacian(octa)
        W = lap.stiffness.toarray()
        assert W[0, 2] == pytest.approx(-1.0 / np.sqrt(3.0))
        assert W[0, 1] == 0.0
        np.testing.assert_allclose(lap.mass, np.full(6, 2.0 * np.sqrt(3.0) / 3.0))

    def test_symmetric_with_zero_row_sums(self, small_sphere: TriangleMesh) -> None:
        """W is symmetric and annihilates constants."""
        lap = build_laplacian(small_sphere)
        W = lap.stiffness
        assert abs(W - W.T).max() < 1e-12
        assert row_sum_defect(lap) < 1e-12

    def test_positive_semi_definite(self, small_sphere: TriangleMesh) -> None:
        """All eigenvalues of W are ≥ 0 up to round-off."""
        evals = np.linalg.eigvalsh(build_laplacian(small_sphere).stiffness.toarray())
        assert evals.min() > -1e-10

    def test_scale_invariance(self, small_sphere: TriangleMesh) -> None:
        """W is scale invariant; M scales with area."""
        base = build_laplacian(small_sphere)
        scaled = build_laplacian(scale(small_sphere, 3.0))
        assert abs(scaled.stiffness - base.stiffness).max() < 1e-10
        np.testing.assert_allclose(scaled.mass, 9.0 * base.mass)

    def test_rotation_invariance(self, small_sphere: TriangleMesh) -> None:
        """Rigid motions leave W and M unchanged."""
        base = build_laplacian(small_sphere)
        moved = build_laplacian(rigid_transform(small_sphere, np.random.default_rng(3)))
        assert abs(moved.stiffness - base.stiffness).max() < 1e-9
        np.testing.assert_allclose(moved.mass, base.mass, rtol=1e-9)

    def test_degenerate_face(self) -> None:
        """A collinear face is reported by index."""
        vertices = np.array(
            [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, 0.0, 0.0]]
        )
        mesh = TriangleMesh(vertices=vertices, faces=[[0, 1, 2], [0, 1, 3]])
        with pytest.raises(DegenerateGeometry) as info:
            build_laplacian(mesh)
        assert info.value.face == 1


# ---------------------------------------------------------------------------
# Geodesics
# ---------------------------------------------------------------------------


class TestGeodesics:
    """Tests for edge-graph shortest paths."""

    def test_source_is_zero(self, octa: TriangleMesh) -> None:
        """d(source) = 0 and neighbours sit one edge away."""
        d = geodesic_distances(octa, 0)
        assert d[0] == 0.0
        assert d[2] == pytest.approx(np.sqrt(2.0))
        assert d[1] == pytest.approx(2.0 * np.sqrt(2.0))

    def test_grid_diagonal(self) -> None:
        """Grid diagonals are edges, so the far corner is √2 away."""
        mesh = grid(5, 5)
        d = geodesic_distances(mesh, 0)
        assert d[4] == pytest.approx(1.0)
        assert d[24] == pytest.approx(np.sqrt(2.0))

    def test_symmetric(self, small_sphere: TriangleMesh) -> None:
        """d(i, j) == d(j, i)."""
        a = geodesic_distances(small_sphere, 3)
        b = geodesic_distances(small_sphere, 40)
        assert a[40] == pytest.approx(b[3])

    def test_disconnected_raises(self, meshes_dir: Path) -> None:
        """Unreachable vertices raise by default."""
        mesh = load_mesh(meshes_dir / "two_islands.off")
        with pytest.raises(DisconnectedMesh) as info:
            geodesic_distances(mesh, 0)
        assert np.isinf(info.value.distances[3:]).all()

    def test_disconnected_allowed(self, meshes_dir: Path) -> None:
        """allow_unreachable returns inf instead of raising."""
        mesh = load_mesh(meshes_dir / "two_islands.off")
        d = geodesic_distances(mesh, 4, allow_unreachable=True)
        assert np.isinf(d[:3]).all()
        assert d[3] == pytest.approx(1.0)

    def test_bad_source(self, octa: TriangleMesh) -> None:
        """Source must be a vertex index."""
        with pytest.raises(InvalidArgument):
            geodesic_distances(octa, 6)

    def test_triangle_inequality(self, small_sphere: TriangleMesh) -> None:
        """d(a, c) <= d(a, b) + d(b, c) over sampled sources and every target."""
        mesh = smooth_deformation(small_sphere, np.random.default_rng(3), amplitude=0.1)
        oracle = GeodesicOracle(mesh)
        sources = np.random.default_rng(4).choice(mesh.n, size=25, replace=False)
        fields = np.stack([oracle.field(int(s)) for s in sources])
        for a in range(sources.size):
            through = fields[a, sources][:, None] + fields
            assert np.all(fields[a][None, :] <= through.min(axis=0) + 1e-12)

    def test_oracle_caches_fields(self, octa: TriangleMesh) -> None:
        """The oracle reuses distance fields and gathers pairs."""
        oracle = GeodesicOracle(octa)
        d = oracle.distances(np.array([0, 0, 1]), np.array([0, 1, 4]))
        np.testing.assert_allclose(d, [0.0, 2.0 * np.sqrt(2.0), np.sqrt(2.0)])
        assert oracle.field(0) is oracle.field(0)


# ---------------------------------------------------------------------------
# Procedural meshes and transforms
# ---------------------------------------------------------------------------


class TestPrimitives:
    """Tests for procedural meshes."""

    @pytest.mark.parametrize(("level", "count"), [(0, 12), (1, 42), (2, 162)])
    def test_icosphere_sizes(self, level: int, count: int) -> None:
        """Vertex counts follow 10·4^s + 2."""
        mesh = icosphere(level)
        assert mesh.n == count
        assert mesh.euler_characteristic() == 2

    def test_icosphere_on_radius(self) -> None:
        """Every vertex lies on the requested sphere."""
        mesh = icosphere(2, radius=2.5)
        np.testing.assert_allclose(np.linalg.norm(mesh.vertices, axis=1), 2.5, rtol=1e-12)

    def test_grid_indexing(self) -> None:
        """Vertex (i, j) has index j·nx + i."""
        mesh = grid(4, 3, width=3.0, height=2.0)
        np.testing.assert_allclose(mesh.vertices[2 * 4 + 1], [1.0, 2.0, 0.0])

    @pytest.mark.parametrize("name", sorted(BUNDLED_MESHES))
    def test_bundled_meshes_valid(self, name: str) -> None:
        """Every bundled mesh builds a Laplacian."""
        lap = build_laplacian(bundled_mesh(name))
        assert lap.n == bundled_mesh(name).n

    def test_bundled_torus_genus_one(self) -> None:
        """The torus has χ = 0."""
        assert bundled_mesh("bumpy_torus").euler_characteristic() == 0

    def test_unknown_bundled(self) -> None:
        """Unknown names list the known ones."""
        with pytest.raises(InvalidArgument, match="bumpy_sphere"):
            bundled_mesh("teapot")


class TestTransforms:
    """Tests for mesh transforms."""

    def test_permuted_copy_rows(self, octa: TriangleMesh, rng: np.random.Generator) -> None:
        """Y vertex i is X vertex perm[i] and the surfaces agree."""
        copy, pi = permuted_copy(octa, rng)
        np.testing.assert_array_equal(copy.vertices, octa.vertices[pi.indices])
        assert copy.total_area() == pytest.approx(octa.total_area())
        assert pi.is_partial_permutation()

    def test_permuted_copy_preserves_laplacian(self, octa: TriangleMesh) -> None:
        """W_Y = P W_X Pᵀ for the relabeling."""
        perm = np.array([3, 5, 0, 1, 4, 2])
        copy, _ = permuted_copy(octa, permutation=perm)
        W_x = build_laplacian(octa).stiffness.toarray()
        W_y = build_laplacian(copy).stiffness.toarray()
        np.testing.assert_allclose(W_y, W_x[np.ix_(perm, perm)], atol=1e-12)

    def test_permuted_copy_needs_permutation(self, octa: TriangleMesh) -> None:
        """Invalid permutations are rejected."""
        with pytest.raises(InvalidArgument):
            permuted_copy(octa, permutation=np.array([0, 0, 1, 2, 3, 4]))
        with pytest.raises(InvalidArgument):
            permuted_copy(octa)

    def test_scale_positive(self, octa: TriangleMesh) -> None:
        """Non-positive factors are rejected."""
        with pytest.raises(InvalidArgument):
            scale(octa, 0.0)

    def test_smooth_deformation_is_small(
        self, small_sphere: TriangleMesh, rng: np.random.Generator
    ) -> None:
        """Displacements stay within the requested fraction of the diagonal."""
        deformed = smooth_deformation(small_sphere, rng, amplitude=0.02)
        v = small_sphere.vertices
        diagonal = np.linalg.norm(v.max(axis=0) - v.min(axis=0))
        shift = np.linalg.norm(deformed.vertices - v, axis=1)
        assert shift.max() < 0.1 * diagonal
        assert shift.max() > 0.0

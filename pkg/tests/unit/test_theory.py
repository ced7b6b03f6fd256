"""Unit tests for the repeated-row and map-equality checks."""

from __future__ import annotations

from itertools import permutations

import numpy as np
import pytest

from fmapforge.exceptions import InvalidArgument, KTooLarge
from fmapforge.mesh.laplacian import build_laplacian
from fmapforge.schema import TriangleMesh
from fmapforge.solver.fmap import COND_LIMIT
from fmapforge.spectral.basis import compute_basis
from fmapforge.theory.checks import (
    SINGULAR_RATIO_LIMIT,
    _draw_coefficients,
    check_lemma_repeated_rows,
    check_theorem_map_equality,
    enumerate_objectives,
    run_verification,
)

# ---------------------------------------------------------------------------
# Repeated rows
# ---------------------------------------------------------------------------


class TestEnumerateObjectives:
    """Tests for exhaustive enumeration."""

    def test_matches_direct_evaluation(self, rng: np.random.Generator) -> None:
        """Each entry equals ‖Π F_X - F_Y‖² for the map in permutation order."""
        fx = rng.standard_normal((4, 2))
        fy = rng.standard_normal((2, 2))
        objectives = enumerate_objectives(fx, fy)
        maps = list(permutations(range(4), 2))
        assert objectives.shape == (12,)
        for value, target in zip(objectives, maps):
            assert value == pytest.approx(np.sum((fx[list(target)] - fy) ** 2))


class TestRepeatedRows:
    """Tests for the repeated-row construction."""

    @pytest.mark.parametrize(("n_x", "n_y"), [(3, 1), (4, 2), (6, 3), (8, 4)])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_duplicated_rows_are_ambiguous(self, n_x: int, n_y: int, seed: int) -> None:
        """A duplicated row pair gives at least two minimisers."""
        report = check_lemma_repeated_rows(n_x, n_y, 3, seed)
        assert report.passed
        assert report.minimizer_count >= 2
        assert report.objective_gap < 1e-12

    @pytest.mark.parametrize(("n_x", "n_y"), [(3, 1), (6, 3), (8, 4)])
    def test_control_is_unique(self, n_x: int, n_y: int) -> None:
        """Generic distinct rows have a single minimiser."""
        report = check_lemma_repeated_rows(n_x, n_y, 3, 0, duplicated=False)
        assert report.minimizer_count == 1
        assert report.passed

    def test_candidate_count(self) -> None:
        """All 8·7·6·5 injective maps are enumerated."""
        assert check_lemma_repeated_rows(8, 4, 2, 0).candidates == 1680

    @pytest.mark.parametrize(
        ("n_x", "n_y", "c"), [(9, 2, 3), (3, 4, 3), (3, 0, 3), (3, 2, 0)]
    )
    def test_bad_sizes(self, n_x: int, n_y: int, c: int) -> None:
        """Sizes outside the enumerable range are rejected."""
        with pytest.raises(InvalidArgument):
            check_lemma_repeated_rows(n_x, n_y, c, 0)

    def test_duplicate_needs_two_rows(self) -> None:
        """n_x = 1 cannot hold a duplicated pair."""
        with pytest.raises(InvalidArgument):
            check_lemma_repeated_rows(1, 1, 2, 0)
        assert check_lemma_repeated_rows(1, 1, 2, 0, duplicated=False).candidates == 1


# ---------------------------------------------------------------------------
# Map equality
# ---------------------------------------------------------------------------


class TestMapEquality:
    """Tests for solved-versus-converted map equality."""

    @pytest.mark.parametrize("k", [2, 5, 10])
    @pytest.mark.parametrize("extra", [0, 3])
    def test_equality_under_hypotheses(
        self, small_sphere: TriangleMesh, k: int, extra: int
    ) -> None:
        """In-span features with λ = 0 give C = C^Π."""
        report = check_theorem_map_equality(small_sphere, k, k + extra, seed=7)
        assert report.hypotheses_hold
        assert report.passed
        assert report.coupling_loss < 1e-16
        assert report.min_singular_value > 0

    def test_identity_permutation(self, small_sphere: TriangleMesh) -> None:
        """The identity relabeling gives C = I."""
        report = check_theorem_map_equality(small_sphere, 5, 8, seed=0, identity=True)
        assert report.identity_permutation
        assert report.passed

    def test_shared_basis(self, small_sphere: TriangleMesh) -> None:
        """A larger precomputed basis is truncated to k."""
        basis = compute_basis(build_laplacian(small_sphere), 12)
        report = check_theorem_map_equality(small_sphere, 4, 6, seed=1, basis=basis)
        assert report.k == 4
        assert report.passed

    def test_out_of_span_noise_breaks_equality(self, small_sphere: TriangleMesh) -> None:
        """Features outside span(Φ) separate the solved and converted maps."""
        report = check_theorem_map_equality(small_sphere, 5, 8, seed=3, complement_noise=0.5)
        assert not report.hypotheses_hold
        assert report.map_gap > 1e-6
        assert not report.passed

    def test_k_too_large(self, octa: TriangleMesh) -> None:
        """k must be below the vertex count."""
        with pytest.raises(KTooLarge):
            check_theorem_map_equality(octa, 6, 6, seed=0)

    def test_c_below_k(self, small_sphere: TriangleMesh) -> None:
        """Fewer features than basis functions violate the rank hypothesis."""
        with pytest.raises(InvalidArgument):
            check_theorem_map_equality(small_sphere, 5, 4, seed=0)

    def test_rejects_draws_the_solver_would_refuse(self) -> None:
        """A draw accepted for the check never trips the row-system condition guard."""
        ill = np.diag([1.0, 1.0, 1e-7])
        well = np.eye(3)

        class _Draws:
            def __init__(self) -> None:
                self.queue = [ill, well]

            def standard_normal(self, shape: tuple[int, int]) -> np.ndarray:
                return self.queue.pop(0)

        coeffs, draws = _draw_coefficients(_Draws(), 3, 3)  # type: ignore[arg-type]
        assert draws == 2
        np.testing.assert_array_equal(coeffs, well)
        singular = np.linalg.svd(ill, compute_uv=False)
        assert (singular[0] / singular[-1]) ** 2 > COND_LIMIT
        assert SINGULAR_RATIO_LIMIT**2 <= COND_LIMIT * (1 + 1e-12)


class TestRunVerification:
    """Tests for the verification sweep."""

    def test_all_pass(self, small_sphere: TriangleMesh) -> None:
        """Every check passes on a small sweep."""
        outcomes = run_verification(
            {"sphere": small_sphere}, [2, 5], [0, 1], lemma_sizes=[(3, 1), (4, 2)]
        )
        assert len(outcomes) == 16
        assert all(o.passed for o in outcomes)
        assert {o.check for o in outcomes} == {"theorem", "lemma", "lemma-control"}

    def test_skips_large_k(self, octa: TriangleMesh) -> None:
        """Basis sizes at or above n are skipped."""
        outcomes = run_verification({"octa": octa}, [3, 6], [0], lemma_sizes=[(3, 1)])
        theorem = [o for o in outcomes if o.check == "theorem"]
        assert len(theorem) == 2
        assert all("k=3" in o.instance for o in theorem)

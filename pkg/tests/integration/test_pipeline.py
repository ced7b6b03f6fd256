"""Integration tests for matching, adaptation and verification end to end.

Acceptance-scale runs on the bundled meshes; deselect with ``-m "not slow"``.
"""

from __future__ import annotations

import numpy as np
import pytest

from fmapforge.conversion.pointmaps import pointmap_from_fmap
from fmapforge.conversion.refine import refine_spectral_upsampling
from fmapforge.descriptors.signatures import wks
from fmapforge.evaluation.metrics import evaluate
from fmapforge.mesh.laplacian import build_laplacian
from fmapforge.mesh.primitives import BUNDLED_MESHES, bumpy_sphere, bundled_mesh
from fmapforge.mesh.transforms import permuted_copy, smooth_deformation
from fmapforge.schema import (
    FunctionalMap,
    LossWeights,
    MaskKind,
    Provenance,
    SolverParams,
    TriangleMesh,
)
from fmapforge.solver.adapt import PairProblem, adapt_params, assert_monotone
from fmapforge.solver.fmap import solve_fmap
from fmapforge.solver.masks import build_mask
from fmapforge.spectral.basis import compute_basis
from fmapforge.theory.checks import run_verification
from tests.conftest import random_coefficients

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def sphere() -> TriangleMesh:
    """Bumpy sphere with 642 vertices."""
    return bumpy_sphere(subdivisions=3)


class TestMatching:
    """Default solver settings on identical and relabeled shapes."""

    def test_self_matching_is_identity(self, sphere: TriangleMesh) -> None:
        """A shape matched to itself maps (almost) every vertex to itself."""
        basis = compute_basis(build_laplacian(sphere), 30)
        features = wks(basis, 100)
        mask = build_mask(MaskKind.RESOLVENT, basis.evals, basis.evals, 0.5)
        fmap = solve_fmap(features.coefficients, features.coefficients, mask, 100.0)
        np.testing.assert_allclose(fmap.matrix, np.eye(30), atol=1e-6)
        pi = pointmap_from_fmap(fmap, basis, basis)
        assert pi.indices is not None
        assert np.mean(pi.indices == np.arange(sphere.n)) >= 0.99

    def test_relabeled_copy_with_refinement(self, sphere: TriangleMesh) -> None:
        """Solving at k = 10 and upsampling to 30 recovers the relabeling."""
        copy, truth = permuted_copy(sphere, np.random.default_rng(3))
        basis_x = compute_basis(build_laplacian(sphere), 30)
        basis_y = compute_basis(build_laplacian(copy), 30)
        bx, by = basis_x.truncate(10), basis_y.truncate(10)
        fx, fy = wks(bx, 100), wks(by, 100)
        mask = build_mask(MaskKind.RESOLVENT, bx.evals, by.evals, 0.5)
        solved = solve_fmap(fx.coefficients, fy.coefficients, mask, 100.0)

        _, pi = refine_spectral_upsampling(solved, basis_x, basis_y, 10, 30, step=5)
        assert pi.indices is not None and truth.indices is not None
        assert np.mean(pi.indices == truth.indices) >= 0.99
        result = evaluate(pi, truth.indices, sphere)
        assert result.mean_error < 1e-3
        assert result.auc > 0.99

    def test_refined_map_is_converted(self, sphere: TriangleMesh) -> None:
        """Upsampling a solved map returns a converted map."""
        basis = compute_basis(build_laplacian(sphere), 12)
        initial = FunctionalMap(matrix=np.eye(6), provenance=Provenance.SOLVED)
        fmap, _ = refine_spectral_upsampling(initial, basis, basis, 6, 12, step=3)
        assert fmap.provenance is Provenance.CONVERTED


class TestAdaptation:
    """Self-adaptive (λ, γ) on small collections."""

    def test_monotone_on_deformed_pairs(self, sphere: TriangleMesh) -> None:
        """The recorded loss never increases over five deformed pairs."""
        rng = np.random.default_rng(11)
        params = SolverParams(k=20)
        base = compute_basis(build_laplacian(sphere), 20)
        problems = []
        for i in range(5):
            other = compute_basis(build_laplacian(smooth_deformation(sphere, rng)), 20)
            problems.append(
                PairProblem.from_features(
                    wks(base, 50), wks(other, 50), base, other, params, name=f"pair-{i}"
                )
            )
        result = adapt_params(problems, params, steps=10, step_size=0.1)
        assert_monotone(result.trace)
        assert result.trace[-1].report.total <= result.trace[0].report.total

    def test_recovers_planted_gamma(self) -> None:
        """Targets solved at a planted γ pull the coupling-only optimum towards it."""
        rng = np.random.default_rng(5)
        k, c = 10, 20
        ax, ay, ex, ey = random_coefficients(rng, k, c)
        planted_lambda, planted_gamma = 100.0, 0.3
        mask_xy = build_mask(MaskKind.RESOLVENT, ex, ey, planted_gamma)
        mask_yx = build_mask(MaskKind.RESOLVENT, ey, ex, planted_gamma)
        problem = PairProblem(
            name="planted",
            coeffs_x=ax,
            coeffs_y=ay,
            evals_x=ex,
            evals_y=ey,
            coupled_xy=solve_fmap(ax, ay, mask_xy, planted_lambda).matrix,
            coupled_yx=solve_fmap(ay, ax, mask_yx, planted_lambda).matrix,
        )
        start = SolverParams(
            lambda_=planted_lambda,
            gamma=0.5,
            k=k,
            weights=LossWeights(bij=0.0, orth=0.0, couple=1.0, contrast=0.0),
        )
        result = adapt_params([problem], start, steps=200, step_size=0.1)
        assert_monotone(result.trace)
        assert abs(result.params.gamma - planted_gamma) < 0.15
        assert result.trace[-1].report.total < 0.1 * result.trace[0].report.total


class TestVerification:
    """Both map-relation checks over the bundled meshes."""

    def test_all_checks_pass(self) -> None:
        """Every instance of both checks passes on ten seeds."""
        meshes = {name: bundled_mesh(name) for name in BUNDLED_MESHES}
        outcomes = run_verification(meshes, [2, 5, 10], list(range(10)))
        failed = [o for o in outcomes if not o.passed]
        assert not failed, failed[:3]
        assert {o.check for o in outcomes} == {"theorem", "lemma", "lemma-control"}


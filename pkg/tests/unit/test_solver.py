"""Unit tests for the structural masks and the functional-map solver."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmapforge.exceptions import (
    DimensionMismatch,
    GammaOutOfRange,
    InvalidArgument,
    ProvenanceMismatch,
    SingularSystem,
)
from fmapforge.schema import FunctionalMap, MaskKind, Provenance, SolverParams
from fmapforge.solver.fmap import (
    fmap_param_gradients,
    normal_equation_residual,
    objective,
    solve_fmap,
)
from fmapforge.solver.masks import (
    band_contrast,
    build_mask,
    mask_gamma_derivative,
    mask_resolvent,
    mask_standard,
)
from tests.conftest import random_coefficients

spectra = st.lists(
    st.floats(min_value=0.0, max_value=1e3, allow_nan=False), min_size=1, max_size=12
)
# Multiples of 0.1, so unequal values are never rounding neighbours.
grid_spectra = st.lists(
    st.integers(min_value=0, max_value=1000).map(lambda i: i / 10.0), min_size=1, max_size=12
)
wide_spectra = st.lists(
    st.floats(min_value=0.0, max_value=1e12, allow_nan=False), min_size=1, max_size=12
)

# ---------------------------------------------------------------------------
# Masks
# ---------------------------------------------------------------------------


class TestMasks:
    """Tests for the standard and resolvent masks."""

    def test_resolvent_reference_value(self) -> None:
        """Λ_Y = 1, Λ_X = 4, γ = 1/2 gives (0.1)² + (0.3)² = 0.10."""
        mask = mask_resolvent(np.array([4.0]), np.array([1.0]), 0.5)
        assert mask.entries[0, 0] == pytest.approx(0.10, abs=1e-15)
        assert mask.kind is MaskKind.RESOLVENT
        assert mask.gamma == 0.5

    def test_standard_values(self) -> None:
        """entry[i][j] = (Λ_Y[i] - Λ_X[j])²."""
        mask = mask_standard(np.array([0.0, 2.0]), np.array([1.0, 5.0, 2.0]))
        assert mask.shape == (3, 2)
        np.testing.assert_allclose(mask.entries, [[1.0, 1.0], [25.0, 9.0], [4.0, 0.0]])

    def test_zero_eigenvalue_maps_to_unit_imaginary(self) -> None:
        """0^γ is 0, so a zero eigenvalue sits at (0, 1)."""
        mask = mask_resolvent(np.array([0.0]), np.array([1.0]), 1.0)
        # (0.5 - 0)² + (0.5 - 1)²
        assert mask.entries[0, 0] == pytest.approx(0.5)

    @settings(max_examples=50, deadline=None)
    @given(spectra, spectra, st.floats(min_value=0.05, max_value=1.0))
    def test_zero_on_equal_eigenvalues(
        self, evals_x: list[float], evals_y: list[float], gamma: float
    ) -> None:
        """Both masks vanish exactly where Λ_Y[i] == Λ_X[j]."""
        ex = np.array(evals_x + evals_y)
        ey = np.array(evals_y)
        for mask in (mask_resolvent(ex, ey, gamma), mask_standard(ex, ey)):
            assert np.all(mask.entries >= 0)
            equal = ey[:, None] == ex[None, :]
            assert np.all(mask.entries[equal] == 0.0)

    @settings(max_examples=50, deadline=None)
    @given(grid_spectra, grid_spectra, st.floats(min_value=0.05, max_value=1.0))
    def test_zero_only_on_equal_eigenvalues(
        self, evals_x: list[float], evals_y: list[float], gamma: float
    ) -> None:
        """A zero entry means the two eigenvalues are equal."""
        ex = np.array(evals_x)
        ey = np.array(evals_y)
        equal = ey[:, None] == ex[None, :]
        for mask in (mask_resolvent(ex, ey, gamma), mask_standard(ex, ey)):
            np.testing.assert_array_equal(mask.entries == 0.0, equal)

    @pytest.mark.parametrize("gamma", [0.05, 0.5, 1.0])
    def test_zero_set_over_many_pairs(self, gamma: float) -> None:
        """Zeros coincide with equal eigenvalues over 10⁴ pairs."""
        rng = np.random.default_rng(7)
        ex = rng.integers(0, 200, size=100) / 4.0
        ey = rng.integers(0, 200, size=100) / 4.0
        equal = ey[:, None] == ex[None, :]
        assert equal.any()
        assert (~equal).any()
        for mask in (mask_resolvent(ex, ey, gamma), mask_standard(ex, ey)):
            assert mask.entries.size == 10_000
            np.testing.assert_array_equal(mask.entries == 0.0, equal)

    @settings(max_examples=100, deadline=None)
    @given(wide_spectra, wide_spectra, st.floats(min_value=0.01, max_value=1.0))
    def test_resolvent_entries_bounded(
        self, evals_x: list[float], evals_y: list[float], gamma: float
    ) -> None:
        """Resolvent entries never exceed 1.25."""
        mask = mask_resolvent(np.array(evals_x), np.array(evals_y), gamma)
        assert np.all(mask.entries <= 1.25)
        # Each eigenvalue lands on the circle of diameter 1 through (0, 0) and (0, 1).
        assert np.all(mask.entries <= 1.0 + 1e-12)

    @pytest.mark.parametrize("gamma", [0.25, 0.5, 1.0])
    def test_funnel_shape(self, gamma: float) -> None:
        """Near-diagonal entries are much smaller than off-diagonal ones."""
        evals_x = np.arange(30, dtype=np.float64)
        evals_y = 1.03 * evals_x
        near, far = band_contrast(mask_resolvent(evals_x, evals_y, gamma), width=1)
        assert near < 0.5 * far

    @pytest.mark.parametrize("gamma", [0.0, -0.1, 1.5])
    def test_gamma_out_of_range(self, gamma: float) -> None:
        """γ must lie in (0, 1]."""
        with pytest.raises(GammaOutOfRange):
            mask_resolvent(np.ones(2), np.ones(2), gamma)

    def test_negative_eigenvalue(self) -> None:
        """Spectra must be non-negative."""
        with pytest.raises(InvalidArgument):
            mask_standard(np.array([-1.0]), np.array([1.0]))

    def test_build_mask_dispatch(self) -> None:
        """build_mask ignores γ for the standard mask."""
        mask = build_mask("standard", np.array([1.0]), np.array([2.0]), gamma=5.0)
        assert mask.kind is MaskKind.STANDARD
        assert mask.gamma is None

    def test_gamma_derivative_matches_finite_difference(self) -> None:
        """∂mask/∂γ agrees with a central difference."""
        rng = np.random.default_rng(1)
        ex, ey = rng.uniform(0.0, 20.0, 6), rng.uniform(0.0, 20.0, 5)
        ex[0] = 0.0
        gamma, h = 0.4, 1e-6
        numeric = (
            mask_resolvent(ex, ey, gamma + h).entries - mask_resolvent(ex, ey, gamma - h).entries
        ) / (2 * h)
        analytic = mask_gamma_derivative(MaskKind.RESOLVENT, ex, ey, gamma)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-9)

    def test_standard_has_no_gamma_derivative(self) -> None:
        """The standard mask does not depend on γ."""
        d = mask_gamma_derivative(MaskKind.STANDARD, np.ones(3), np.ones(2), 0.5)
        assert d.shape == (2, 3)
        assert not d.any()


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


def _dense_solution(coeffs_x, coeffs_y, mask_entries, strength):  # type: ignore[no-untyped-def]
    """Solve the full (k_Y·k_X)-dimensional normal equations directly."""
    k_y, k_x = mask_entries.shape
    gram = coeffs_x @ coeffs_x.T
    big = np.kron(np.eye(k_y), gram) + strength * np.diag(mask_entries.ravel())
    rhs = (coeffs_y @ coeffs_x.T).ravel()
    return np.linalg.solve(big, rhs).reshape(k_y, k_x)


class TestSolveFmap:
    """Tests for the row-decoupled solve."""

    @pytest.mark.parametrize("strength", [0.0, 1.0, 100.0])
    def test_matches_dense_oracle(self, rng: np.random.Generator, strength: float) -> None:
        """Row systems reproduce the full normal-equation solution."""
        ax, ay, ex, ey = random_coefficients(rng, 8, 20)
        mask = mask_resolvent(ex, ey, 0.5)
        fmap = solve_fmap(ax, ay, mask, strength)
        expected = _dense_solution(ax, ay, mask.entries, strength)
        np.testing.assert_allclose(fmap.matrix, expected, atol=1e-9)

    def test_rectangular(self, rng: np.random.Generator) -> None:
        """k_Y may differ from k_X."""
        ax = rng.standard_normal((6, 15))
        ay = rng.standard_normal((4, 15))
        mask = mask_standard(np.arange(6.0), np.arange(4.0))
        fmap = solve_fmap(ax, ay, mask, 2.0)
        assert fmap.shape == (4, 6)
        np.testing.assert_allclose(
            fmap.matrix, _dense_solution(ax, ay, mask.entries, 2.0), atol=1e-9
        )

    def test_records_provenance(self, rng: np.random.Generator) -> None:
        """Solved maps carry their mask and strength."""
        ax, ay, ex, ey = random_coefficients(rng, 5, 10)
        mask = mask_standard(ex, ey)
        fmap = solve_fmap(ax, ay, mask, 3.0)
        assert fmap.provenance is Provenance.SOLVED
        assert fmap.strength == 3.0
        assert fmap.mask is mask

    def test_normal_equations_hold(self, rng: np.random.Generator) -> None:
        """The residual of the normal equations is at round-off level."""
        ax, ay, ex, ey = random_coefficients(rng, 10, 25)
        fmap = solve_fmap(ax, ay, mask_resolvent(ex, ey, 0.3), 50.0)
        assert normal_equation_residual(fmap, ax, ay) < 1e-10

    def test_minimises_objective(self, rng: np.random.Generator) -> None:
        """Random perturbations never lower the objective."""
        ax, ay, ex, ey = random_coefficients(rng, 6, 12)
        mask = mask_resolvent(ex, ey, 0.5)
        fmap = solve_fmap(ax, ay, mask, 10.0)
        best = objective(fmap.matrix, ax, ay, mask, 10.0)
        for _ in range(20):
            perturbed = fmap.matrix + 1e-3 * rng.standard_normal(fmap.shape)
            assert objective(perturbed, ax, ay, mask, 10.0) >= best

    def test_identity_for_equal_inputs(self, rng: np.random.Generator) -> None:
        """A_X = A_Y with equal spectra gives C = I for any λ."""
        ax, _, ex, _ = random_coefficients(rng, 6, 12)
        fmap = solve_fmap(ax, ax, mask_resolvent(ex, ex, 0.5), 1e3)
        np.testing.assert_allclose(fmap.matrix, np.eye(6), atol=1e-9)

    def test_singular_without_regularisation(self, rng: np.random.Generator) -> None:
        """Fewer features than basis functions with λ = 0 is singular."""
        ax = rng.standard_normal((6, 3))
        ay = rng.standard_normal((6, 3))
        with pytest.raises(SingularSystem) as info:
            solve_fmap(ax, ay, mask_standard(np.arange(6.0), np.arange(6.0)), 0.0)
        assert info.value.condition > 1e12

    def test_negative_strength(self, rng: np.random.Generator) -> None:
        """λ must be non-negative."""
        ax, ay, ex, ey = random_coefficients(rng, 4, 8)
        with pytest.raises(InvalidArgument):
            solve_fmap(ax, ay, mask_standard(ex, ey), -1.0)

    def test_feature_count_mismatch(self, rng: np.random.Generator) -> None:
        """A_X and A_Y need the same number of columns."""
        with pytest.raises(DimensionMismatch):
            solve_fmap(
                rng.standard_normal((4, 8)),
                rng.standard_normal((4, 9)),
                mask_standard(np.arange(4.0), np.arange(4.0)),
                1.0,
            )

    def test_residual_needs_solved_map(self) -> None:
        """Converted maps have no normal equations."""
        converted = FunctionalMap(matrix=np.eye(2), provenance=Provenance.CONVERTED)
        with pytest.raises(ProvenanceMismatch):
            normal_equation_residual(converted, np.eye(2), np.eye(2))


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------


def _scalar_loss(ax, ay, ex, ey, weights, params):  # type: ignore[no-untyped-def]
    mask = build_mask(params.mask_kind, ex, ey, params.gamma)
    return float(np.sum(weights * solve_fmap(ax, ay, mask, params.lambda_).matrix))


class TestParamGradients:
    """Implicit gradients against central finite differences."""

    @pytest.mark.parametrize("gamma", [0.3, 0.7])
    def test_unconstrained_gradients(self, rng: np.random.Generator, gamma: float) -> None:
        """d/d log λ and d/d logit γ match finite differences to 1e-4."""
        ax, ay, ex, ey = random_coefficients(rng, 7, 14)
        weights = rng.standard_normal((7, 7))
        params = SolverParams(lambda_=20.0, gamma=gamma, k=7)
        mask = build_mask(params.mask_kind, ex, ey, params.gamma)
        fmap = solve_fmap(ax, ay, mask, params.lambda_)
        grads = fmap_param_gradients(fmap, ax, ay, ex, ey, params, weights)

        h = 1e-5
        x0 = params.to_unconstrained()
        numeric = []
        for axis in range(2):
            step = np.zeros(2)
            step[axis] = h
            plus = _scalar_loss(ax, ay, ex, ey, weights, params.from_unconstrained(x0 + step))
            minus = _scalar_loss(ax, ay, ex, ey, weights, params.from_unconstrained(x0 - step))
            numeric.append((plus - minus) / (2 * h))

        assert grads.d_log_lambda == pytest.approx(numeric[0], rel=1e-4, abs=1e-8)
        assert grads.d_logit_gamma == pytest.approx(numeric[1], rel=1e-4, abs=1e-8)

    def test_natural_and_unconstrained_consistent(self, rng: np.random.Generator) -> None:
        """Chain rule: d/du = λ d/dλ and d/dv = γ(1-γ) d/dγ."""
        ax, ay, ex, ey = random_coefficients(rng, 5, 10)
        params = SolverParams(lambda_=4.0, gamma=0.25, k=5)
        fmap = solve_fmap(ax, ay, build_mask("resolvent", ex, ey, 0.25), 4.0)
        g = fmap_param_gradients(fmap, ax, ay, ex, ey, params, np.ones((5, 5)))
        assert g.d_log_lambda == pytest.approx(4.0 * g.d_lambda)
        assert g.d_logit_gamma == pytest.approx(0.25 * 0.75 * g.d_gamma)

    def test_standard_mask_has_no_gamma_gradient(self, rng: np.random.Generator) -> None:
        """γ does not enter the standard mask."""
        ax, ay, ex, ey = random_coefficients(rng, 5, 10)
        params = SolverParams(lambda_=1.0, k=5, mask_kind=MaskKind.STANDARD)
        fmap = solve_fmap(ax, ay, mask_standard(ex, ey), 1.0)
        g = fmap_param_gradients(fmap, ax, ay, ex, ey, params, np.ones((5, 5)))
        assert g.d_gamma == 0.0

    def test_wrong_lambda(self, rng: np.random.Generator) -> None:
        """Params must describe the solve being differentiated."""
        ax, ay, ex, ey = random_coefficients(rng, 4, 8)
        fmap = solve_fmap(ax, ay, mask_resolvent(ex, ey, 0.5), 1.0)
        with pytest.raises(ProvenanceMismatch):
            fmap_param_gradients(
                fmap, ax, ay, ex, ey, SolverParams(lambda_=2.0, k=4), np.ones((4, 4))
            )

    def test_wrong_gamma(self, rng: np.random.Generator) -> None:
        """A different γ is also a provenance mismatch."""
        ax, ay, ex, ey = random_coefficients(rng, 4, 8)
        fmap = solve_fmap(ax, ay, mask_resolvent(ex, ey, 0.5), 1.0)
        with pytest.raises(ProvenanceMismatch):
            fmap_param_gradients(
                fmap, ax, ay, ex, ey, SolverParams(lambda_=1.0, gamma=0.4, k=4), np.ones((4, 4))
            )

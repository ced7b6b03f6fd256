"""Regularised functional-map solve and its parameter gradients.

The objective ‖C A_X - A_Y‖²_F + λ Σ_ij mask_ij C_ij² is diagonal in the
entries of each row of C, so it splits into one k_X × k_X system per row:

    (A_X A_Xᵀ + λ diag(mask_i)) c_i = A_X a_i      (a_i = row i of A_Y)

Gradients with respect to (λ, γ) come from the implicit function theorem:
one adjoint solve per row reuses the Cholesky factor of the forward solve.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import linalg

from fmapforge.exceptions import (
    DimensionMismatch,
    InvalidArgument,
    ProvenanceMismatch,
    SingularSystem,
)
from fmapforge.schema import FunctionalMap, MaskKind, MaskMatrix, Provenance, SolverParams
from fmapforge.solver.masks import mask_gamma_derivative

COND_LIMIT = 1e12


class ParamGradients(NamedTuple):
    """Loss gradients in natural and unconstrained coordinates."""

    d_log_lambda: float
    d_logit_gamma: float
    d_lambda: float
    d_gamma: float


class RowSystems:
    """Factorised per-row normal equations H_i = A_X A_Xᵀ + λ diag(mask_i).

    Raises:
        SingularSystem: If some H_i has condition number above 1e12.
    """

    def __init__(self, coeffs_x: np.ndarray, mask: np.ndarray, strength: float) -> None:
        """Assemble and factorise every row system."""
        k_y, k_x = mask.shape
        gram = coeffs_x @ coeffs_x.T
        matrices = np.repeat(gram[None, :, :], k_y, axis=0)
        diag = np.arange(k_x)
        matrices[:, diag, diag] += strength * mask

        eigenvalues = np.linalg.eigvalsh(matrices)
        smallest, largest = eigenvalues[:, 0], eigenvalues[:, -1]
        with np.errstate(divide="ignore", invalid="ignore"):
            condition = np.where(smallest > 0, largest / smallest, np.inf)
        bad = np.flatnonzero(~(condition <= COND_LIMIT))
        if bad.size:
            row = int(bad[0])
            raise SingularSystem(
                f"Row system {row} has condition number {condition[row]:.3e}",
                row=row,
                condition=float(condition[row]),
            )
        self.matrices = matrices
        self.condition = condition
        self._factors = [linalg.cho_factor(h, lower=True, check_finite=False) for h in matrices]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve H_i x_i = rhs_i for every row i."""
        return np.stack(
            [linalg.cho_solve(f, r, check_finite=False) for f, r in zip(self._factors, rhs)]
        )


def _check_inputs(coeffs_x: np.ndarray, coeffs_y: np.ndarray, mask: MaskMatrix) -> None:
    if coeffs_x.ndim != 2 or coeffs_y.ndim != 2:
        raise DimensionMismatch("Coefficient matrices must be 2-D")
    if coeffs_x.shape[1] != coeffs_y.shape[1]:
        raise DimensionMismatch(
            "A_X and A_Y need the same feature count",
            expected=coeffs_x.shape[1],
            actual=coeffs_y.shape[1],
        )
    expected = (coeffs_y.shape[0], coeffs_x.shape[0])
    if mask.shape != expected:
        raise DimensionMismatch("Mask must be k_Y × k_X", expected=expected, actual=mask.shape)


def solve_fmap(
    coeffs_x: np.ndarray,
    coeffs_y: np.ndarray,
    mask: MaskMatrix,
    strength: float,
) -> FunctionalMap:
    """Solve for the functional map C (k_Y × k_X) minimising the masked objective.

    Args:
        coeffs_x: A_X, k_X × c spectral feature coefficients of X.
        coeffs_y: A_Y, k_Y × c spectral feature coefficients of Y.
        mask: k_Y × k_X penalty weights.
        strength: Regularisation strength λ ≥ 0.

    Returns:
        FunctionalMap with provenance SOLVED recording ``mask`` and ``strength``.

    Raises:
        DimensionMismatch: On incompatible shapes.
        SingularSystem: If a row system is numerically singular.
    """
    coeffs_x = np.asarray(coeffs_x, dtype=np.float64)
    coeffs_y = np.asarray(coeffs_y, dtype=np.float64)
    _check_inputs(coeffs_x, coeffs_y, mask)
    if strength < 0 or not np.isfinite(strength):
        raise InvalidArgument(f"Regularisation strength must be finite and >= 0, got {strength}")

    systems = RowSystems(coeffs_x, mask.entries, strength)
    matrix = systems.solve(coeffs_y @ coeffs_x.T)
    return FunctionalMap(
        matrix=matrix, provenance=Provenance.SOLVED, strength=strength, mask=mask
    )


def objective(
    matrix: np.ndarray,
    coeffs_x: np.ndarray,
    coeffs_y: np.ndarray,
    mask: MaskMatrix,
    strength: float,
) -> float:
    """Evaluate ‖C A_X - A_Y‖²_F + λ Σ mask ∘ C²."""
    data = matrix @ coeffs_x - coeffs_y
    return float(np.sum(data**2) + strength * np.sum(mask.entries * matrix**2))


def normal_equation_residual(
    solution: FunctionalMap, coeffs_x: np.ndarray, coeffs_y: np.ndarray
) -> float:
    """Largest row residual of the normal equations, relative to the right-hand side."""
    if solution.provenance is not Provenance.SOLVED or solution.mask is None:
        raise ProvenanceMismatch("Normal equations only apply to solved maps")
    gram = coeffs_x @ coeffs_x.T
    rhs = coeffs_y @ coeffs_x.T
    C = solution.matrix
    lhs = C @ gram + (solution.strength or 0.0) * solution.mask.entries * C
    scale = max(float(np.abs(rhs).max()), 1.0)
    return float(np.abs(lhs - rhs).max() / scale)


def fmap_param_gradients(
    solution: FunctionalMap,
    coeffs_x: np.ndarray,
    coeffs_y: np.ndarray,
    evals_x: np.ndarray,
    evals_y: np.ndarray,
    params: SolverParams,
    upstream: np.ndarray,
) -> ParamGradients:
    """Chain an upstream gradient dL/dC through the solve to (λ, γ).

    For each row, w_i = H_i⁻¹ g_i with g_i the upstream row; then
    dL/dλ = -Σ_i w_i · (m_i ∘ c_i) and dL/dγ = -λ Σ_i w_i · (∂m_i/∂γ ∘ c_i).
    Unconstrained gradients use λ = exp(u) and γ = 1 / (1 + exp(-v)).

    Args:
        solution: Map returned by :func:`solve_fmap` with ``params``.
        coeffs_x: A_X used for the solve.
        coeffs_y: A_Y used for the solve.
        evals_x: Λ_X the mask was built from.
        evals_y: Λ_Y the mask was built from.
        params: Parameters of the solve.
        upstream: dL/dC, same shape as C.

    Returns:
        ParamGradients.

    Raises:
        ProvenanceMismatch: If ``solution`` was not solved with ``params``.
    """
    if solution.provenance is not Provenance.SOLVED or solution.mask is None:
        raise ProvenanceMismatch("Parameter gradients need a solved functional map")
    mask = solution.mask
    if solution.strength is None or not np.isclose(
        solution.strength, params.lambda_, rtol=1e-12, atol=0.0
    ):
        raise ProvenanceMismatch(
            f"Map was solved with λ={solution.strength}, params carry λ={params.lambda_}"
        )
    if mask.kind is not params.mask_kind or (
        mask.kind is MaskKind.RESOLVENT and mask.gamma != params.gamma
    ):
        raise ProvenanceMismatch("Map was solved with a different mask than params describe")
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != solution.shape:
        raise DimensionMismatch(
            "Upstream gradient must match C", expected=solution.shape, actual=upstream.shape
        )

    _check_inputs(np.asarray(coeffs_x), np.asarray(coeffs_y), mask)
    C = solution.matrix
    lam, gamma = params.lambda_, params.gamma
    systems = RowSystems(np.asarray(coeffs_x, dtype=np.float64), mask.entries, lam)
    adjoint = systems.solve(upstream)

    d_lambda = -float(np.sum(adjoint * mask.entries * C))
    d_mask = mask_gamma_derivative(mask.kind, evals_x, evals_y, gamma)
    d_gamma = -lam * float(np.sum(adjoint * d_mask * C))
    return ParamGradients(
        d_log_lambda=lam * d_lambda,
        d_logit_gamma=gamma * (1.0 - gamma) * d_gamma,
        d_lambda=d_lambda,
        d_gamma=d_gamma,
    )

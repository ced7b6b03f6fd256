"""Self-adaptive optimisation of the solver parameters (λ, γ).

Features stay frozen; only λ and γ move, in unconstrained coordinates
u = log λ and v = logit γ. One (λ, γ) pair is shared by both map
directions C_XY and C_YX. The objective is the mean weighted total loss
over a collection of pairs.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from enum import Enum
from typing import NamedTuple

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, model_validator

from fmapforge.conversion.pointmaps import (
    PointMapMode,
    fmap_from_pointmap,
    pointmap_from_features,
)
from fmapforge.exceptions import (
    BasisTooSmall,
    DimensionMismatch,
    InvalidArgument,
    MonotonicityViolation,
    NonFiniteLoss,
    NumericalError,
)
from fmapforge.losses.terms import loss_contrastive, loss_report, pair_loss_gradients
from fmapforge.schema import FeatureMatrix, FloatArray, LossReport, SolverParams, SpectralBasis
from fmapforge.solver.fmap import fmap_param_gradients, solve_fmap
from fmapforge.solver.masks import build_mask

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 40
MAX_GROWTH = 2.0**10
GRAD_TOL = 1e-14
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class Optimizer(str, Enum):
    """Parameter update rule."""

    GD = "gd"
    ADAM = "adam"


class PairProblem(BaseModel):
    """Everything about one shape pair that stays fixed during adaptation."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str = "pair"
    coeffs_x: FloatArray
    coeffs_y: FloatArray
    evals_x: FloatArray
    evals_y: FloatArray
    coupled_xy: FloatArray
    coupled_yx: FloatArray
    contrast_x: float = Field(default=0.0, ge=0)
    contrast_y: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _check(self) -> PairProblem:
        k_x, k_y = self.evals_x.size, self.evals_y.size
        if self.coeffs_x.shape[0] != k_x or self.coeffs_y.shape[0] != k_y:
            raise DimensionMismatch("Coefficient rows must match the spectra")
        if self.coupled_xy.shape != (k_y, k_x) or self.coupled_yx.shape != (k_x, k_y):
            raise DimensionMismatch("Coupling targets must be k_Y × k_X and k_X × k_Y")
        return self

    @classmethod
    def from_features(
        cls,
        features_x: FeatureMatrix,
        features_y: FeatureMatrix,
        basis_x: SpectralBasis,
        basis_y: SpectralBasis,
        params: SolverParams,
        name: str = "pair",
    ) -> PairProblem:
        """Precompute coefficients, coupling targets and contrastive terms.

        Coupling targets are the converted maps of the soft feature point maps
        Softmax(F_Y F_Xᵀ / τ) and Softmax(F_X F_Yᵀ / τ).

        Raises:
            BasisTooSmall: If either basis has fewer than ``params.k`` pairs.
        """
        k = params.k
        if k > basis_x.k or k > basis_y.k:
            raise BasisTooSmall(f"k={k} exceeds basis sizes {basis_x.k} and {basis_y.k}")
        bx, by = basis_x.truncate(k), basis_y.truncate(k)
        pi_yx = pointmap_from_features(features_x, features_y, PointMapMode.SOFTMAX, params.tau)
        pi_xy = pointmap_from_features(features_y, features_x, PointMapMode.SOFTMAX, params.tau)
        return cls(
            name=name,
            coeffs_x=bx.phi_dagger @ features_x.values,
            coeffs_y=by.phi_dagger @ features_y.values,
            evals_x=bx.evals,
            evals_y=by.evals,
            coupled_xy=fmap_from_pointmap(pi_yx, bx, by).matrix,
            coupled_yx=fmap_from_pointmap(pi_xy, by, bx).matrix,
            contrast_x=loss_contrastive(features_x, bx, params.tau),
            contrast_y=loss_contrastive(features_y, by, params.tau),
        )


class TraceEntry(BaseModel):
    """One accepted iterate of the adaptation."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    step: int = Field(ge=0)
    lambda_: float = Field(alias="lambda")
    gamma: float
    report: LossReport

    def as_row(self) -> dict[str, float | int]:
        """Flatten to the trace CSV columns."""
        return {
            "step": self.step,
            "lambda": self.lambda_,
            "gamma": self.gamma,
            "total": self.report.total,
            "bij": self.report.bij,
            "orth": self.report.orth,
            "couple": self.report.couple,
            "contrast": self.report.contrast,
        }


TRACE_COLUMNS = ["step", "lambda", "gamma", "total", "bij", "orth", "couple", "contrast"]


class AdaptationResult(BaseModel):
    """Final parameters and the accepted-step trace."""

    model_config = ConfigDict(frozen=True)

    params: SolverParams
    trace: list[TraceEntry]
    stop_reason: str


class _Evaluation(NamedTuple):
    params: SolverParams
    report: LossReport
    gradient: np.ndarray


Evaluator = Callable[[SolverParams], _Evaluation]
PairInput = PairProblem | tuple[FeatureMatrix, FeatureMatrix, SpectralBasis, SpectralBasis]


def evaluate_pair(problem: PairProblem, params: SolverParams) -> tuple[LossReport, np.ndarray]:
    """Loss report and (∂/∂u, ∂/∂v) of the total for one pair.

    Raises:
        SingularSystem: If a row system of either solve is singular.
    """
    lam, gamma, kind = params.lambda_, params.gamma, params.mask_kind
    mask_xy = build_mask(kind, problem.evals_x, problem.evals_y, gamma)
    mask_yx = build_mask(kind, problem.evals_y, problem.evals_x, gamma)
    c_xy = solve_fmap(problem.coeffs_x, problem.coeffs_y, mask_xy, lam)
    c_yx = solve_fmap(problem.coeffs_y, problem.coeffs_x, mask_yx, lam)

    report = loss_report(
        c_xy,
        c_yx,
        problem.coupled_xy,
        problem.coupled_yx,
        problem.contrast_x,
        problem.contrast_y,
        params.weights,
    )
    g_xy, g_yx = pair_loss_gradients(
        c_xy.matrix, c_yx.matrix, problem.coupled_xy, problem.coupled_yx, params.weights
    )
    grad_xy = fmap_param_gradients(
        c_xy, problem.coeffs_x, problem.coeffs_y, problem.evals_x, problem.evals_y, params, g_xy
    )
    grad_yx = fmap_param_gradients(
        c_yx, problem.coeffs_y, problem.coeffs_x, problem.evals_y, problem.evals_x, params, g_yx
    )
    gradient = np.array(
        [
            grad_xy.d_log_lambda + grad_yx.d_log_lambda,
            grad_xy.d_logit_gamma + grad_yx.d_logit_gamma,
        ]
    )
    return report, gradient


def evaluate_collection(
    problems: Sequence[PairProblem], params: SolverParams, jobs: int = 1
) -> tuple[LossReport, np.ndarray]:
    """Mean loss report and mean unconstrained gradient over pairs."""
    results = Parallel(n_jobs=jobs, prefer="threads")(
        delayed(evaluate_pair)(problem, params) for problem in problems
    )
    reports = [report for report, _ in results]
    gradient = np.mean([grad for _, grad in results], axis=0)
    return LossReport.mean(reports, params.weights), gradient


def _is_finite(evaluation: _Evaluation) -> bool:
    return math.isfinite(evaluation.report.total) and bool(np.all(np.isfinite(evaluation.gradient)))


def _entry(step: int, evaluation: _Evaluation) -> TraceEntry:
    return TraceEntry(
        step=step,
        lambda_=evaluation.params.lambda_,
        gamma=evaluation.params.gamma,
        report=evaluation.report,
    )


def adapt_params(
    pairs: Sequence[PairInput],
    params0: SolverParams,
    steps: int,
    step_size: float,
    *,
    optimizer: Optimizer | str = Optimizer.GD,
    jobs: int = 1,
) -> AdaptationResult:
    """Optimise (λ, γ) on the mean total loss of a pair collection.

    Gradient descent uses Armijo backtracking (factor 0.5, c = 1e-4) and
    doubles the trial step after every accepted step. Each accepted step
    strictly lowers the loss. Adam (learning rate ``step_size``) records
    only iterates that improve on the best loss so far.

    Args:
        pairs: PairProblems, or (F_X, F_Y, basis_X, basis_Y) tuples.
        params0: Starting parameters (also supply k, τ, weights, mask kind).
        steps: Iteration budget; 0 evaluates the start point only.
        step_size: Initial step (GD) or learning rate (Adam).
        optimizer: ``gd`` or ``adam``.
        jobs: Threads used to evaluate pairs.

    Returns:
        AdaptationResult whose trace starts with the initial loss.

    Raises:
        InvalidArgument: On an empty collection or bad budgets.
        NonFiniteLoss: If the loss or gradient blows up.
    """
    if not pairs:
        raise InvalidArgument("adapt_params needs at least one pair")
    if steps < 0:
        raise InvalidArgument(f"steps must be >= 0, got {steps}")
    if step_size <= 0:
        raise InvalidArgument(f"step_size must be positive, got {step_size}")

    problems = [
        pair
        if isinstance(pair, PairProblem)
        else PairProblem.from_features(*pair, params=params0, name=f"pair{i}")
        for i, pair in enumerate(pairs)
    ]

    def evaluate(params: SolverParams) -> _Evaluation:
        report, gradient = evaluate_collection(problems, params, jobs)
        return _Evaluation(params, report, gradient)

    try:
        current = evaluate(params0)
    except NumericalError as exc:
        raise NonFiniteLoss(
            f"Initial loss could not be evaluated: {exc}", last_params=params0
        ) from exc
    if not _is_finite(current):
        raise NonFiniteLoss("Initial loss or gradient is not finite", last_params=params0)

    trace = [_entry(0, current)]
    if Optimizer(optimizer) is Optimizer.ADAM:
        return _run_adam(evaluate, current, trace, steps, step_size)
    return _run_gradient_descent(evaluate, current, trace, steps, step_size)


def _try_candidate(
    evaluate: Evaluator, params: SolverParams, x: np.ndarray
) -> _Evaluation | None:
    try:
        candidate = params.from_unconstrained(x)
        return evaluate(candidate)
    except (NumericalError, InvalidArgument, OverflowError) as exc:
        logger.debug("Rejected candidate %s: %s", x, exc)
        return None


def _run_gradient_descent(
    evaluate: Evaluator,
    current: _Evaluation,
    trace: list[TraceEntry],
    steps: int,
    step_size: float,
) -> AdaptationResult:
    alpha = step_size
    stop_reason = "budget exhausted"
    for _ in range(steps):
        gradient = current.gradient
        g_norm2 = float(gradient @ gradient)
        if g_norm2 <= GRAD_TOL**2:
            stop_reason = "stationary point"
            break
        x = current.params.to_unconstrained()
        accepted = None
        trial = alpha
        for _ in range(MAX_BACKTRACKS):
            candidate = _try_candidate(evaluate, current.params, x - trial * gradient)
            if candidate is not None and math.isfinite(candidate.report.total):
                bound = current.report.total - ARMIJO_C * trial * g_norm2
                total = candidate.report.total
                if total <= bound and total < current.report.total:
                    accepted = candidate
                    break
            trial *= BACKTRACK
        if accepted is None:
            stop_reason = "line search stalled"
            break
        if not np.all(np.isfinite(accepted.gradient)):
            raise NonFiniteLoss(
                "Gradient became non-finite", last_params=current.params, trace=trace
            )
        current = accepted
        trace.append(_entry(len(trace), current))
        alpha = min(2.0 * trial, MAX_GROWTH * step_size)
        logger.debug(
            "step %d: loss %.6e, λ=%.4g, γ=%.4f",
            len(trace) - 1,
            current.report.total,
            current.params.lambda_,
            current.params.gamma,
        )
    return AdaptationResult(params=current.params, trace=trace, stop_reason=stop_reason)


def _run_adam(
    evaluate: Evaluator,
    current: _Evaluation,
    trace: list[TraceEntry],
    steps: int,
    lr: float,
) -> AdaptationResult:
    beta1, beta2 = ADAM_BETAS
    x = current.params.to_unconstrained()
    first = np.zeros_like(x)
    second = np.zeros_like(x)
    best = current
    latest = current
    for t in range(1, steps + 1):
        gradient = latest.gradient
        first = beta1 * first + (1.0 - beta1) * gradient
        second = beta2 * second + (1.0 - beta2) * gradient**2
        m_hat = first / (1.0 - beta1**t)
        v_hat = second / (1.0 - beta2**t)
        x = x - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        candidate = _try_candidate(evaluate, best.params, x)
        if candidate is None or not _is_finite(candidate):
            raise NonFiniteLoss(
                f"Adam iterate {t} produced a non-finite loss",
                last_params=best.params,
                trace=trace,
            )
        latest = candidate
        if candidate.report.total < best.report.total:
            best = candidate
            trace.append(_entry(len(trace), best))
    return AdaptationResult(params=best.params, trace=trace, stop_reason="budget exhausted")


def assert_monotone(trace: Sequence[TraceEntry]) -> None:
    """Raise if the total loss ever increases between accepted steps.

    Raises:
        MonotonicityViolation: On the first increase.
    """
    for previous, entry in zip(trace, trace[1:]):
        if entry.report.total > previous.report.total:
            raise MonotonicityViolation(
                f"Loss rose from {previous.report.total!r} to {entry.report.total!r} "
                f"at step {entry.step}"
            )

"""Numerical checks of the map-relation results behind the coupling loss.

Two constructions are verified on small instances:

* Repeated feature rows make the point-map problem ambiguous: with one
  duplicated row pair in F_X, exhaustive enumeration over all injective
  maps finds at least two minimisers of ‖Π F_X - F_Y‖²_F, while generic
  distinct rows give exactly one.
* When F_Y = Π F_X, F_X lies in the span of Φ_X, λ = 0 and A_X has full
  rank, the solved map equals the converted map C^Π = Φ_Y† Π Φ_X.
"""

from __future__ import annotations

import logging
from itertools import permutations
from math import perm

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.spatial.distance import cdist

from fmapforge.conversion.pointmaps import fmap_from_pointmap
from fmapforge.exceptions import InvalidArgument, KTooLarge, RankDeficientDraw
from fmapforge.losses.terms import loss_coupling
from fmapforge.mesh.laplacian import build_laplacian
from fmapforge.mesh.transforms import permuted_copy
from fmapforge.schema import MaskKind, MaskMatrix, PointMap, SpectralBasis, TriangleMesh
from fmapforge.solver.fmap import COND_LIMIT, solve_fmap
from fmapforge.spectral.basis import compute_basis

logger = logging.getLogger(__name__)

MAX_LEMMA_VERTICES = 8
OBJECTIVE_TOL = 1e-12
MAP_GAP_TOL = 1e-8
DATA_RESIDUAL_TOL = 1e-10
# The row systems see A_X A_Xᵀ, whose condition number is this ratio squared.
SINGULAR_RATIO_LIMIT = COND_LIMIT**0.5
MAX_DRAWS = 5
RESEED_OFFSET = 1_000_003


class LemmaReport(BaseModel):
    """Outcome of one exhaustive point-map enumeration."""

    model_config = ConfigDict(frozen=True)

    n_x: int
    n_y: int
    c: int
    seed: int
    duplicated: bool
    candidates: int
    minimizer_count: int
    min_objective: float
    objective_gap: float
    reseeded: bool = False

    @property
    def passed(self) -> bool:
        """Duplicated rows need ≥ 2 minimisers; distinct rows exactly one."""
        if self.duplicated:
            return self.minimizer_count >= 2 and self.objective_gap < OBJECTIVE_TOL
        return self.minimizer_count == 1


class TheoremReport(BaseModel):
    """Outcome of one solved-versus-converted map comparison."""

    model_config = ConfigDict(frozen=True)

    n: int
    k: int
    c: int
    seed: int
    identity_permutation: bool
    complement_noise: float
    map_gap: float
    data_residual: float
    coupling_loss: float
    min_singular_value: float
    singular_ratio: float
    draws: int

    @property
    def hypotheses_hold(self) -> bool:
        """Whether the features lie in the span of the basis."""
        return self.complement_noise == 0.0

    @property
    def passed(self) -> bool:
        """Both the map gap and the data residual are within tolerance."""
        return self.map_gap < MAP_GAP_TOL and self.data_residual < DATA_RESIDUAL_TOL


# ---------------------------------------------------------------------------
# Repeated rows
# ---------------------------------------------------------------------------


def enumerate_objectives(features_x: np.ndarray, features_y: np.ndarray) -> np.ndarray:
    """Objective ‖Π F_X - F_Y‖²_F of every injective map, in permutation order."""
    costs = cdist(features_y, features_x, metric="sqeuclidean")
    n_x, n_y = features_x.shape[0], features_y.shape[0]
    maps = np.array(list(permutations(range(n_x), n_y)), dtype=np.int64).reshape(-1, n_y)
    return np.asarray(costs[np.arange(n_y)[None, :], maps].sum(axis=1))


def _lemma_instance(
    n_x: int, n_y: int, c: int, seed: int, duplicated: bool
) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    features_x = rng.standard_normal((n_x, c))
    features_y = rng.standard_normal((n_y, c))
    if duplicated:
        features_x[1] = features_x[0]
        features_y[0] = features_x[0]
    return features_x, features_y


def _lemma_report(
    features_x: np.ndarray, features_y: np.ndarray, seed: int, duplicated: bool, reseeded: bool
) -> LemmaReport:
    objectives = enumerate_objectives(features_x, features_y)
    best = float(objectives.min())
    minimizers = objectives[objectives <= best + OBJECTIVE_TOL]
    return LemmaReport(
        n_x=features_x.shape[0],
        n_y=features_y.shape[0],
        c=features_x.shape[1],
        seed=seed,
        duplicated=duplicated,
        candidates=int(objectives.size),
        minimizer_count=int(minimizers.size),
        min_objective=best,
        objective_gap=float(minimizers.max() - best),
        reseeded=reseeded,
    )


def check_lemma_repeated_rows(
    n_x: int, n_y: int, c: int, seed: int, *, duplicated: bool = True
) -> LemmaReport:
    """Enumerate all injective maps Y → X and count the minimisers.

    With ``duplicated`` rows 0 and 1 of F_X are equal and F_Y[0] copies
    them, so swapping the two targets always yields a second minimiser.
    The control (``duplicated=False``) draws generic distinct rows; a draw
    with a tied minimum is re-seeded once.

    Args:
        n_x: Rows of F_X, at most 8.
        n_y: Rows of F_Y, at most ``n_x``.
        c: Feature dimension.
        seed: Random seed.
        duplicated: Build the repeated-row instance or the control.

    Returns:
        LemmaReport.

    Raises:
        InvalidArgument: If the sizes are out of range.
    """
    if not 1 <= n_y <= n_x <= MAX_LEMMA_VERTICES:
        raise InvalidArgument(f"Need 1 <= n_y <= n_x <= {MAX_LEMMA_VERTICES}, got {n_y}, {n_x}")
    if duplicated and n_x < 2:
        raise InvalidArgument("A duplicated row pair needs n_x >= 2")
    if c < 1:
        raise InvalidArgument(f"c must be positive, got {c}")
    logger.debug("Enumerating %d injective maps", perm(n_x, n_y))

    features_x, features_y = _lemma_instance(n_x, n_y, c, seed, duplicated)
    report = _lemma_report(features_x, features_y, seed, duplicated, reseeded=False)
    if duplicated or report.minimizer_count == 1:
        return report

    logger.warning(
        "Control draw with seed %d has %d tied minimisers; re-seeding once",
        seed,
        report.minimizer_count,
    )
    features_x, features_y = _lemma_instance(n_x, n_y, c, seed + RESEED_OFFSET, duplicated)
    return _lemma_report(features_x, features_y, seed, duplicated, reseeded=True)


# ---------------------------------------------------------------------------
# Solved map equals converted map
# ---------------------------------------------------------------------------


def _draw_coefficients(rng: np.random.Generator, k: int, c: int) -> tuple[np.ndarray, int]:
    for draw in range(1, MAX_DRAWS + 1):
        coeffs = rng.standard_normal((k, c))
        singular = np.linalg.svd(coeffs, compute_uv=False)
        if singular[-1] > 0 and singular[0] / singular[-1] <= SINGULAR_RATIO_LIMIT:
            return coeffs, draw
    raise RankDeficientDraw(f"A_X stayed rank deficient after {MAX_DRAWS} draws")


def _complement_noise(
    rng: np.random.Generator, basis: SpectralBasis, signal: np.ndarray, relative: float
) -> np.ndarray:
    """Random noise M-orthogonal to span(Φ) with M-norm ``relative``·‖signal‖_M."""
    noise = rng.standard_normal(signal.shape)
    noise -= basis.phi @ (basis.phi_dagger @ noise)
    norm = np.sqrt(np.sum(basis.mass[:, None] * noise**2))
    target = relative * np.sqrt(np.sum(basis.mass[:, None] * signal**2))
    return noise * (target / norm)


def check_theorem_map_equality(
    mesh: TriangleMesh,
    k: int,
    c: int,
    seed: int,
    *,
    identity: bool = False,
    complement_noise: float = 0.0,
    basis: SpectralBasis | None = None,
) -> TheoremReport:
    """Compare the λ = 0 solved map with the converted map on a known pair.

    Y is the mesh with its vertices relabelled by Π; its basis is Π Φ_X with
    the mass permuted alike, used directly rather than recomputed. With
    ``complement_noise > 0`` the features leave the span of Φ_X; Y is then
    the mesh itself under a random feature relabelling, since the permuted
    copy's pseudo-inverse would cancel the noise exactly.

    Args:
        mesh: Mesh X.
        k: Basis size, ``k < n``.
        c: Feature count, ``c >= k``.
        seed: Random seed.
        identity: Use the identity permutation.
        complement_noise: Relative M-norm of out-of-span feature noise.
        basis: Precomputed basis of X with at least k pairs.

    Returns:
        TheoremReport.

    Raises:
        KTooLarge: If ``k >= n``.
        InvalidArgument: If ``c < k`` or the noise level is negative.
        RankDeficientDraw: If A_X stays rank deficient.
    """
    n = mesh.n
    if k >= n:
        raise KTooLarge(f"k={k} must be smaller than n={n}")
    if c < k:
        raise InvalidArgument(f"Need c >= k, got c={c}, k={k}")
    if complement_noise < 0:
        raise InvalidArgument("complement_noise must be non-negative")

    basis_x = (basis if basis is not None else compute_basis(build_laplacian(mesh), k)).truncate(k)
    rng = np.random.default_rng(seed)
    permutation = np.arange(n) if identity else rng.permutation(n)

    if complement_noise > 0:
        pi = PointMap.hard(permutation, n_target=n)
        basis_y = basis_x
    else:
        _, pi = permuted_copy(mesh, permutation=permutation)
        basis_y = SpectralBasis(
            phi=basis_x.phi[permutation], evals=basis_x.evals, mass=basis_x.mass[permutation]
        )

    coeffs_x, draws = _draw_coefficients(rng, k, c)
    features_x = basis_x.phi @ coeffs_x
    if complement_noise > 0:
        features_x = features_x + _complement_noise(rng, basis_x, features_x, complement_noise)
    features_y = pi.apply(features_x)
    a_x = basis_x.phi_dagger @ features_x
    a_y = basis_y.phi_dagger @ features_y

    zero_mask = MaskMatrix(entries=np.zeros((k, k)), kind=MaskKind.STANDARD)
    solved = solve_fmap(a_x, a_y, zero_mask, 0.0)
    converted = fmap_from_pointmap(pi, basis_x, basis_y)
    singular = np.linalg.svd(a_x, compute_uv=False)

    return TheoremReport(
        n=n,
        k=k,
        c=c,
        seed=seed,
        identity_permutation=identity,
        complement_noise=complement_noise,
        map_gap=float(np.linalg.norm(solved.matrix - converted.matrix)),
        data_residual=float(np.linalg.norm(solved.matrix @ a_x - a_y)),
        coupling_loss=loss_coupling(solved, converted),
        min_singular_value=float(singular[-1]),
        singular_ratio=float(singular[0] / singular[-1]),
        draws=draws,
    )


class CheckOutcome(BaseModel):
    """One row of the verification table."""

    model_config = ConfigDict(frozen=True)

    check: str
    instance: str
    passed: bool
    metric: str
    value: float


def run_verification(
    meshes: dict[str, TriangleMesh],
    ks: list[int],
    seeds: list[int],
    *,
    lemma_sizes: list[tuple[int, int]] | None = None,
    lemma_c: int = 3,
) -> list[CheckOutcome]:
    """Run both checks over meshes, basis sizes and seeds.

    Theorem checks use c ∈ {k, k + 3} and skip sizes with k >= n. Lemma
    checks run a duplicated instance and a control for every size and seed.
    """
    outcomes: list[CheckOutcome] = []
    for name, mesh in meshes.items():
        usable = [k for k in ks if k < mesh.n]
        if not usable:
            continue
        full = compute_basis(build_laplacian(mesh), max(usable))
        for k in usable:
            for c in (k, k + 3):
                for seed in seeds:
                    report = check_theorem_map_equality(mesh, k, c, seed, basis=full)
                    outcomes.append(
                        CheckOutcome(
                            check="theorem",
                            instance=f"{name} k={k} c={c} seed={seed}",
                            passed=report.passed,
                            metric="map_gap",
                            value=report.map_gap,
                        )
                    )

    for n_x, n_y in lemma_sizes or [(3, 1), (4, 2), (6, 3), (8, 4)]:
        for seed in seeds:
            for duplicated in (True, False):
                lemma = check_lemma_repeated_rows(n_x, n_y, lemma_c, seed, duplicated=duplicated)
                outcomes.append(
                    CheckOutcome(
                        check="lemma" if duplicated else "lemma-control",
                        instance=f"n_x={n_x} n_y={n_y} seed={seed}",
                        passed=lemma.passed,
                        metric="minimizers",
                        value=float(lemma.minimizer_count),
                    )
                )
    return outcomes

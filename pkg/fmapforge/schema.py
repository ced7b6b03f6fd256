"""Pydantic models for the shape-matching domain.

All pipeline data flows through these models. Never use ad-hoc dicts.
Array fields hold read-only float64/int64 copies, so a model is immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

import hashlib
import math
from enum import Enum
from typing import Annotated, Any

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    model_validator,
)
from scipy import sparse

from fmapforge.exceptions import (
    DegenerateFeatures,
    DegenerateMesh,
    DimensionMismatch,
    InvalidArgument,
)

GAMMA_CEILING = 1.0 - 1e-12


def _frozen_array(value: Any, dtype: type) -> np.ndarray:
    arr = np.array(value, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _float_array(value: Any) -> np.ndarray:
    return _frozen_array(value, np.float64)


def _index_array(value: Any) -> np.ndarray:
    arr = np.asarray(value)
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise DegenerateMesh("Index arrays must contain integers")
    return _frozen_array(arr, np.int64)


def _to_list(arr: np.ndarray) -> list[Any]:
    return arr.tolist()  # type: ignore[no-any-return]


FloatArray = Annotated[np.ndarray, BeforeValidator(_float_array), PlainSerializer(_to_list)]
IndexArray = Annotated[np.ndarray, BeforeValidator(_index_array), PlainSerializer(_to_list)]

_ARRAY_CONFIG = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


class TriangleMesh(BaseModel):
    """A triangle mesh with 0-based faces.

    Invariants: every face index is in [0, n), no face repeats a vertex and
    every vertex is referenced by at least one face.
    """

    model_config = _ARRAY_CONFIG

    vertices: FloatArray
    faces: IndexArray

    @model_validator(mode="after")
    def _check_connectivity(self) -> TriangleMesh:
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise DegenerateMesh(f"Vertices must be (n, 3), got {self.vertices.shape}")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3 or len(self.faces) == 0:
            raise DegenerateMesh(f"Faces must be a non-empty (m, 3) array, got {self.faces.shape}")
        if not np.all(np.isfinite(self.vertices)):
            raise DegenerateMesh("Vertex positions must be finite")

        n = len(self.vertices)
        bad = np.flatnonzero((self.faces < 0).any(axis=1) | (self.faces >= n).any(axis=1))
        if bad.size:
            raise DegenerateMesh(
                f"Face {int(bad[0])} references a vertex outside [0, {n}): "
                f"{self.faces[bad[0]].tolist()}"
            )

        f = self.faces
        same = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        repeated = np.flatnonzero(same)
        if repeated.size:
            face = int(repeated[0])
            raise DegenerateMesh(f"Face {face} repeats a vertex: {f[face].tolist()}")

        referenced = np.zeros(n, dtype=bool)
        referenced[f.ravel()] = True
        isolated = np.flatnonzero(~referenced)
        if isolated.size:
            raise DegenerateMesh(
                f"{isolated.size} isolated vertex/vertices, first is {int(isolated[0])}"
            )
        return self

    @property
    def n(self) -> int:
        """Vertex count."""
        return int(self.vertices.shape[0])

    @property
    def n_faces(self) -> int:
        """Face count."""
        return int(self.faces.shape[0])

    def face_areas(self) -> np.ndarray:
        """Return the area of every face."""
        v = self.vertices
        e1 = v[self.faces[:, 1]] - v[self.faces[:, 0]]
        e2 = v[self.faces[:, 2]] - v[self.faces[:, 0]]
        return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)

    def total_area(self) -> float:
        """Return the total surface area."""
        return float(self.face_areas().sum())

    def edges(self) -> np.ndarray:
        """Return the unique undirected edges as an (E, 2) array with i < j."""
        f = self.faces
        pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        pairs.sort(axis=1)
        return np.unique(pairs, axis=0)

    def euler_characteristic(self) -> int:
        """Return V - E + F."""
        return self.n - len(self.edges()) + self.n_faces

    def content_hash(self) -> str:
        """Return a SHA-256 digest of the vertex and face arrays."""
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.vertices, dtype="<f8").tobytes())
        digest.update(np.ascontiguousarray(self.faces, dtype="<i8").tobytes())
        return digest.hexdigest()


class LaplacianPair(BaseModel):
    """Cotangent stiffness matrix W and lumped mass diagonal M.

    W is symmetric positive semi-definite with zero row sums; ``mass`` holds
    the strictly positive diagonal of M.
    """

    model_config = _ARRAY_CONFIG

    stiffness: sparse.csr_matrix
    mass: FloatArray

    @model_validator(mode="after")
    def _check_shapes(self) -> LaplacianPair:
        n = self.mass.shape[0]
        if self.stiffness.shape != (n, n):
            raise DimensionMismatch(
                "Stiffness and mass sizes differ", expected=(n, n), actual=self.stiffness.shape
            )
        if np.any(self.mass <= 0):
            raise DegenerateMesh("Lumped mass entries must be strictly positive")
        return self

    @property
    def n(self) -> int:
        """Vertex count."""
        return int(self.mass.shape[0])

    @property
    def mass_matrix(self) -> sparse.csr_matrix:
        """Return M as a sparse diagonal matrix."""
        return sparse.diags(self.mass).tocsr()


# ---------------------------------------------------------------------------
# Spectral data
# ---------------------------------------------------------------------------


class SpectralBasis(BaseModel):
    """Truncated LBO eigenbasis with its mass-weighted pseudo-inverse.

    ``phi_dagger`` equals ``phi.T @ M`` exactly; it is filled in from
    ``phi`` and ``mass`` when not supplied.
    """

    model_config = _ARRAY_CONFIG

    phi: FloatArray
    evals: FloatArray
    mass: FloatArray
    phi_dagger: FloatArray = Field(default=None, repr=False)  # type: ignore[assignment]

    @model_validator(mode="before")
    @classmethod
    def _fill_pseudo_inverse(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("phi_dagger") is None:
            phi = np.asarray(data["phi"], dtype=np.float64)
            mass = np.asarray(data["mass"], dtype=np.float64)
            data = {**data, "phi_dagger": (phi * mass[:, None]).T}
        return data

    @model_validator(mode="after")
    def _check_shapes(self) -> SpectralBasis:
        if self.phi.ndim != 2:
            raise DimensionMismatch("phi must be 2-D", expected="(n, k)", actual=self.phi.shape)
        n, k = self.phi.shape
        if self.evals.shape != (k,):
            raise DimensionMismatch(
                "evals must have k entries", expected=(k,), actual=self.evals.shape
            )
        if self.mass.shape != (n,):
            raise DimensionMismatch(
                "mass must have n entries", expected=(n,), actual=self.mass.shape
            )
        if self.phi_dagger.shape != (k, n):
            raise DimensionMismatch(
                "phi_dagger must be (k, n)", expected=(k, n), actual=self.phi_dagger.shape
            )
        return self

    @property
    def n(self) -> int:
        """Vertex count."""
        return int(self.phi.shape[0])

    @property
    def k(self) -> int:
        """Number of eigenpairs."""
        return int(self.phi.shape[1])

    def truncate(self, k: int) -> SpectralBasis:
        """Return the basis restricted to its first ``k`` eigenpairs."""
        if not 1 <= k <= self.k:
            raise InvalidArgument(f"Cannot truncate a {self.k}-basis to k={k}")
        if k == self.k:
            return self
        return SpectralBasis(
            phi=self.phi[:, :k],
            evals=self.evals[:k],
            mass=self.mass,
            phi_dagger=self.phi_dagger[:k],
        )


class FeatureMatrix(BaseModel):
    """Per-vertex descriptors F and their spectral coefficients A = Φ†F.

    Build with :meth:`from_values` so the coefficients always match F.
    """

    model_config = _ARRAY_CONFIG

    values: FloatArray
    coefficients: FloatArray

    @model_validator(mode="after")
    def _check(self) -> FeatureMatrix:
        if self.values.ndim != 2 or self.coefficients.ndim != 2:
            raise DimensionMismatch("Features and coefficients must be 2-D")
        if self.values.shape[1] != self.coefficients.shape[1]:
            raise DimensionMismatch(
                "Feature and coefficient column counts differ",
                expected=self.values.shape[1],
                actual=self.coefficients.shape[1],
            )
        zero_rows = np.flatnonzero(~np.any(self.values != 0.0, axis=1))
        if zero_rows.size:
            raise DegenerateFeatures(f"Feature row {int(zero_rows[0])} is all zero")
        return self

    @classmethod
    def from_values(cls, values: np.ndarray, basis: SpectralBasis) -> FeatureMatrix:
        """Build a feature matrix, projecting ``values`` onto ``basis``."""
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != basis.n:
            raise DimensionMismatch(
                "Feature rows must match the basis vertex count",
                expected=basis.n,
                actual=values.shape[0],
            )
        return cls(values=values, coefficients=basis.phi_dagger @ values)

    @property
    def n(self) -> int:
        """Vertex count."""
        return int(self.values.shape[0])

    @property
    def c(self) -> int:
        """Feature dimension."""
        return int(self.values.shape[1])


# ---------------------------------------------------------------------------
# Functional maps and point maps
# ---------------------------------------------------------------------------


class MaskKind(str, Enum):
    """Structural regulariser used inside the solver."""

    STANDARD = "standard"
    RESOLVENT = "resolvent"


class Provenance(str, Enum):
    """Where a functional map came from."""

    SOLVED = "solved"
    CONVERTED = "converted"


class MaskMatrix(BaseModel):
    """Non-negative k_Y × k_X penalty weights on the entries of C."""

    model_config = _ARRAY_CONFIG

    entries: FloatArray
    kind: MaskKind
    gamma: float | None = None

    @model_validator(mode="after")
    def _check(self) -> MaskMatrix:
        if self.entries.ndim != 2:
            raise DimensionMismatch("Mask must be 2-D", actual=self.entries.shape)
        if np.any(self.entries < 0):
            raise InvalidArgument("Mask entries must be non-negative")
        return self

    @property
    def shape(self) -> tuple[int, int]:
        """(k_Y, k_X)."""
        return int(self.entries.shape[0]), int(self.entries.shape[1])


class FunctionalMap(BaseModel):
    """A k_Y × k_X functional map from X to Y.

    Solved maps record the mask and strength they were solved with, so
    parameter gradients can check they are differentiating the right solve.
    """

    model_config = _ARRAY_CONFIG

    matrix: FloatArray
    provenance: Provenance
    strength: float | None = None
    mask: MaskMatrix | None = Field(default=None, repr=False)
    source: SpectralBasis | None = Field(default=None, repr=False, exclude=True)
    target: SpectralBasis | None = Field(default=None, repr=False, exclude=True)

    @model_validator(mode="after")
    def _check(self) -> FunctionalMap:
        if self.matrix.ndim != 2:
            raise DimensionMismatch("Functional map must be 2-D", actual=self.matrix.shape)
        if not np.all(np.isfinite(self.matrix)):
            raise InvalidArgument("Functional map entries must be finite")
        return self

    @property
    def shape(self) -> tuple[int, int]:
        """(k_Y, k_X)."""
        return int(self.matrix.shape[0]), int(self.matrix.shape[1])


class PointMapKind(str, Enum):
    """Hard index maps or soft row-stochastic maps."""

    HARD = "hard"
    SOFT = "soft"


class PointMap(BaseModel):
    """A point-wise map from the n_Y vertices of Y to the n_X vertices of X.

    Hard maps store one 0-based X index per Y vertex. Soft maps store a
    row-stochastic n_Y × n_X matrix (dense, or CSR for the top-t variant).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: PointMapKind
    n_target: int = Field(gt=0)
    indices: IndexArray | None = None
    weights: Any = Field(default=None, repr=False)

    @model_validator(mode="after")
    def _check(self) -> PointMap:
        if self.kind is PointMapKind.HARD:
            if self.indices is None or self.indices.ndim != 1:
                raise InvalidArgument("Hard point maps need a 1-D index array")
            if self.indices.size and (
                self.indices.min() < 0 or self.indices.max() >= self.n_target
            ):
                raise InvalidArgument(f"Hard map indices must lie in [0, {self.n_target})")
            return self

        if self.weights is None:
            raise InvalidArgument("Soft point maps need a weight matrix")
        w = self.weights
        if w.ndim != 2 or w.shape[1] != self.n_target:
            raise DimensionMismatch(
                "Soft map must be (n_Y, n_X)", expected=("n_Y", self.n_target), actual=w.shape
            )
        data = w.data if sparse.issparse(w) else w
        if np.any(data < 0):
            raise InvalidArgument("Soft map weights must be non-negative")
        row_sums = np.asarray(w.sum(axis=1)).ravel()
        if not np.allclose(row_sums, 1.0, rtol=0.0, atol=1e-9):
            raise InvalidArgument("Soft map rows must sum to 1")
        if not sparse.issparse(w):
            frozen = np.array(w, dtype=np.float64, copy=True)
            frozen.setflags(write=False)
            object.__setattr__(self, "weights", frozen)
        return self

    @classmethod
    def hard(cls, indices: np.ndarray, n_target: int) -> PointMap:
        """Build a hard map."""
        return cls(kind=PointMapKind.HARD, n_target=n_target, indices=indices)

    @classmethod
    def soft(cls, weights: Any) -> PointMap:
        """Build a soft map from a dense or sparse row-stochastic matrix."""
        return cls(kind=PointMapKind.SOFT, n_target=int(weights.shape[1]), weights=weights)

    @property
    def n_source(self) -> int:
        """Number of Y vertices."""
        if self.kind is PointMapKind.HARD:
            assert self.indices is not None
            return int(self.indices.shape[0])
        return int(self.weights.shape[0])

    def is_partial_permutation(self) -> bool:
        """Whether a hard map hits every X vertex at most once."""
        if self.kind is not PointMapKind.HARD:
            return False
        assert self.indices is not None
        return bool(np.unique(self.indices).size == self.indices.size)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Return Π @ values for an (n_X, ...) array."""
        if values.shape[0] != self.n_target:
            raise DimensionMismatch(
                "Values must have one row per X vertex",
                expected=self.n_target,
                actual=values.shape[0],
            )
        if self.kind is PointMapKind.HARD:
            assert self.indices is not None
            return np.asarray(values[self.indices])
        return np.asarray(self.weights @ values)


# ---------------------------------------------------------------------------
# Solver parameters and losses
# ---------------------------------------------------------------------------


class LossWeights(BaseModel):
    """Weights of the unsupervised loss terms."""

    model_config = ConfigDict(frozen=True)

    bij: float = Field(default=1.0, ge=0)
    orth: float = Field(default=1.0, ge=0)
    couple: float = Field(default=1.0, ge=0)
    contrast: float = Field(default=10.0, ge=0)


class SolverParams(BaseModel):
    """Self-adaptive solver state: strength λ, mask shape γ and loss settings.

    Gradient steps happen in unconstrained coordinates u = log λ and
    v = logit γ, so λ > 0 and γ ∈ (0, 1) hold for every iterate.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: float = Field(default=100.0, gt=0, alias="lambda")
    gamma: float = Field(default=0.5, gt=0, le=1)
    k: int = Field(default=30, ge=1)
    tau: float = Field(default=0.07, gt=0)
    weights: LossWeights = Field(default_factory=LossWeights)
    mask_kind: MaskKind = MaskKind.RESOLVENT

    def to_unconstrained(self) -> np.ndarray:
        """Return (log λ, logit γ)."""
        gamma = min(self.gamma, GAMMA_CEILING)
        return np.array([math.log(self.lambda_), math.log(gamma / (1.0 - gamma))])

    def from_unconstrained(self, x: np.ndarray) -> SolverParams:
        """Return a copy with (λ, γ) taken from unconstrained coordinates."""
        u, v = float(x[0]), float(x[1])
        lam = math.exp(u)
        gamma = 1.0 / (1.0 + math.exp(-v)) if v >= 0 else math.exp(v) / (1.0 + math.exp(v))
        if not (lam > 0 and math.isfinite(lam)) or not 0.0 < gamma <= 1.0:
            raise InvalidArgument(f"Unconstrained point {x} maps outside the parameter domain")
        return self.model_copy(update={"lambda_": lam, "gamma": gamma})


class LossReport(BaseModel):
    """Unsupervised loss terms of one pair (or their mean over pairs).

    ``total`` equals w_bij·bij + w_orth·orth + w_couple·couple
    + w_contrast·(contrast_x + contrast_y).
    """

    model_config = ConfigDict(frozen=True)

    bij: float = Field(ge=0)
    orth: float = Field(ge=0)
    couple: float = Field(ge=0)
    contrast_x: float = Field(ge=0)
    contrast_y: float = Field(ge=0)
    total: float = Field(ge=0)

    @classmethod
    def from_terms(
        cls,
        *,
        bij: float,
        orth: float,
        couple: float,
        contrast_x: float,
        contrast_y: float,
        weights: LossWeights,
    ) -> LossReport:
        """Build a report, computing the weighted total."""
        total = (
            weights.bij * bij
            + weights.orth * orth
            + weights.couple * couple
            + weights.contrast * (contrast_x + contrast_y)
        )
        return cls(
            bij=bij,
            orth=orth,
            couple=couple,
            contrast_x=contrast_x,
            contrast_y=contrast_y,
            total=total,
        )

    @classmethod
    def mean(cls, reports: list[LossReport], weights: LossWeights) -> LossReport:
        """Average term-wise; the total is recomputed from the averaged terms."""
        if not reports:
            raise InvalidArgument("Cannot average an empty list of loss reports")
        count = float(len(reports))
        return cls.from_terms(
            bij=sum(r.bij for r in reports) / count,
            orth=sum(r.orth for r in reports) / count,
            couple=sum(r.couple for r in reports) / count,
            contrast_x=sum(r.contrast_x for r in reports) / count,
            contrast_y=sum(r.contrast_y for r in reports) / count,
            weights=weights,
        )

    @property
    def contrast(self) -> float:
        """contrast_x + contrast_y."""
        return self.contrast_x + self.contrast_y


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


class EvalResult(BaseModel):
    """Geodesic evaluation of a hard point map.

    ``per_vertex_error`` is normalised by sqrt(total area of X); unreachable
    vertices hold NaN and are excluded from every statistic.
    """

    model_config = _ARRAY_CONFIG

    per_vertex_error: FloatArray
    mean_error: float
    thresholds: FloatArray
    pck: FloatArray
    auc: float = Field(ge=0, le=1)
    unreachable: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check(self) -> EvalResult:
        finite = self.per_vertex_error[np.isfinite(self.per_vertex_error)]
        if np.any(finite < 0):
            raise InvalidArgument("Geodesic errors must be non-negative")
        if self.thresholds.shape != self.pck.shape:
            raise DimensionMismatch("Each PCK threshold needs one fraction")
        if np.any(np.diff(self.pck) < 0):
            raise InvalidArgument("PCK fractions must be non-decreasing")
        return self

    def pck_points(self) -> list[tuple[float, float]]:
        """Return the PCK curve as (threshold, fraction) pairs."""
        return [(float(t), float(p)) for t, p in zip(self.thresholds, self.pck)]

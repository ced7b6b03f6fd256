"""Geodesic error, PCK curve and AUC of a hard point map.

Errors are geodesic distances on X between predicted and ground-truth
targets, normalised by sqrt(total area of X) so uniformly scaled meshes
score the same.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from scipy.integrate import trapezoid

from fmapforge.exceptions import InvalidArgument, LengthMismatch, UnreachableVertex
from fmapforge.mesh.geodesics import GeodesicOracle
from fmapforge.schema import EvalResult, PointMap, PointMapKind, TriangleMesh
from fmapforge.utils.file_utils import write_csv

logger = logging.getLogger(__name__)

DEFAULT_MAX_THRESHOLD = 0.2
DEFAULT_NUM_THRESHOLDS = 200

PER_VERTEX_COLUMNS = ["vertex", "predicted", "ground_truth", "error"]
SUMMARY_COLUMNS = ["name", "n_vertices", "mean_error", "auc", "unreachable"]
PCK_COLUMNS = ["name", "threshold", "fraction"]


def default_thresholds(
    max_threshold: float = DEFAULT_MAX_THRESHOLD, num: int = DEFAULT_NUM_THRESHOLDS
) -> np.ndarray:
    """Uniform PCK thresholds on [0, max_threshold]."""
    return np.linspace(0.0, max_threshold, num)


def _check_thresholds(thresholds: np.ndarray) -> np.ndarray:
    thresholds = np.asarray(thresholds, dtype=np.float64).reshape(-1)
    if thresholds.size == 0:
        raise InvalidArgument("At least one PCK threshold is required")
    if not np.all(np.isfinite(thresholds)) or thresholds[0] < 0:
        raise InvalidArgument("PCK thresholds must be finite and non-negative")
    if np.any(np.diff(thresholds) <= 0):
        raise InvalidArgument("PCK thresholds must be strictly ascending")
    return thresholds


def pck_curve(errors: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Fraction of finite errors at or below each threshold."""
    finite = np.sort(errors[np.isfinite(errors)])
    if finite.size == 0:
        return np.zeros_like(thresholds)
    return np.searchsorted(finite, thresholds, side="right") / finite.size


def area_under_curve(thresholds: np.ndarray, pck: np.ndarray) -> float:
    """Trapezoidal area under the PCK curve divided by the threshold range."""
    span = float(thresholds[-1] - thresholds[0])
    if span == 0.0:
        return float(pck[0])
    return float(np.clip(trapezoid(pck, thresholds) / span, 0.0, 1.0))


def evaluate(
    predicted: PointMap,
    ground_truth: np.ndarray,
    mesh_x: TriangleMesh,
    thresholds: np.ndarray | None = None,
    *,
    oracle: GeodesicOracle | None = None,
    jobs: int = 1,
) -> EvalResult:
    """Score a hard point map Y → X against ground-truth targets.

    Distance fields are computed once per distinct ground-truth target and
    cached on the oracle. Vertices whose targets are mutually unreachable
    get a NaN error, are excluded from every statistic and counted.

    Args:
        predicted: Hard point map from Y to X.
        ground_truth: Length-n_Y array of true X targets.
        mesh_x: Target mesh X.
        thresholds: Ascending PCK thresholds; 200 points on [0, 0.2] if None.
        oracle: Geodesic oracle of ``mesh_x`` to reuse across calls.
        jobs: Threads used to fill the distance cache.

    Returns:
        EvalResult.

    Raises:
        LengthMismatch: If the maps have different lengths.
        InvalidArgument: If the inputs are not a hard map over ``mesh_x``.
        UnreachableVertex: If no vertex has a reachable target.
    """
    if predicted.kind is not PointMapKind.HARD or predicted.indices is None:
        raise InvalidArgument("Evaluation needs a hard point map")
    truth = np.asarray(ground_truth, dtype=np.int64).reshape(-1)
    if truth.shape[0] != predicted.n_source:
        raise LengthMismatch(
            f"Predicted map has {predicted.n_source} entries, ground truth has {truth.shape[0]}"
        )
    if predicted.n_target != mesh_x.n:
        raise InvalidArgument(
            f"Predicted map targets {predicted.n_target} vertices but X has {mesh_x.n}"
        )
    if truth.size and (truth.min() < 0 or truth.max() >= mesh_x.n):
        raise InvalidArgument(f"Ground-truth targets must lie in [0, {mesh_x.n})")
    thresholds = _check_thresholds(
        default_thresholds() if thresholds is None else thresholds
    )

    oracle = oracle if oracle is not None else GeodesicOracle(mesh_x)
    sources = np.unique(truth)
    Parallel(n_jobs=jobs, prefer="threads")(delayed(oracle.field)(int(s)) for s in sources)
    distances = oracle.distances(truth, predicted.indices)

    unreachable = ~np.isfinite(distances)
    n_unreachable = int(np.count_nonzero(unreachable))
    if n_unreachable == truth.size:
        raise UnreachableVertex("No vertex has a reachable target on X")
    if n_unreachable:
        logger.warning("%d vertex/vertices excluded: target unreachable on X", n_unreachable)

    errors = np.where(unreachable, np.nan, distances) / np.sqrt(mesh_x.total_area())
    pck = pck_curve(errors, thresholds)
    return EvalResult(
        per_vertex_error=errors,
        mean_error=float(np.nanmean(errors)),
        thresholds=thresholds,
        pck=pck,
        auc=area_under_curve(thresholds, pck),
        unreachable=n_unreachable,
    )


def write_eval_results(
    result: EvalResult,
    predicted: PointMap,
    ground_truth: np.ndarray,
    output_dir: str | Path,
    name: str,
) -> list[Path]:
    """Write ``<name>.per_vertex.csv``, ``<name>.summary.csv`` and ``<name>.pck.csv``."""
    output_dir = Path(output_dir)
    if predicted.indices is None:
        raise InvalidArgument("Only hard point maps have per-vertex results")
    per_vertex = (
        {
            "vertex": i,
            "predicted": int(p),
            "ground_truth": int(g),
            "error": float(e),
        }
        for i, (p, g, e) in enumerate(
            zip(predicted.indices, ground_truth, result.per_vertex_error)
        )
    )
    summary = [
        {
            "name": name,
            "n_vertices": int(result.per_vertex_error.shape[0]),
            "mean_error": result.mean_error,
            "auc": result.auc,
            "unreachable": result.unreachable,
        }
    ]
    pck = ({"name": name, "threshold": t, "fraction": f} for t, f in result.pck_points())
    return [
        write_csv(output_dir / f"{name}.per_vertex.csv", PER_VERTEX_COLUMNS, per_vertex),
        write_csv(output_dir / f"{name}.summary.csv", SUMMARY_COLUMNS, summary),
        write_csv(output_dir / f"{name}.pck.csv", PCK_COLUMNS, pck),
    ]

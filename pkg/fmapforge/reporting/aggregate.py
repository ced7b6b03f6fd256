"""Collect evaluation summaries, PCK curves and adapted parameters from a results tree."""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path

import yaml
from pydantic import BaseModel, ConfigDict, ValidationError

from fmapforge.evaluation.metrics import PCK_COLUMNS, SUMMARY_COLUMNS
from fmapforge.exceptions import EmptyInput, ParseError
from fmapforge.utils.file_utils import read_csv

logger = logging.getLogger(__name__)


class SummaryRow(BaseModel):
    """One evaluation summary."""

    model_config = ConfigDict(frozen=True)

    name: str
    n_vertices: int
    mean_error: float
    auc: float
    unreachable: int


class PckSeries(BaseModel):
    """One PCK curve."""

    model_config = ConfigDict(frozen=True)

    name: str
    thresholds: list[float]
    fractions: list[float]


class CollectionParams(BaseModel):
    """Adapted (λ, γ) of one shape collection."""

    model_config = ConfigDict(frozen=True)

    collection: str
    lambda_: float
    gamma: float


class ReportData(BaseModel):
    """Everything the report renders, plus the files that were skipped."""

    summaries: list[SummaryRow] = []
    curves: list[PckSeries] = []
    params: list[CollectionParams] = []
    skipped: list[str] = []


def _rows(path: Path, columns: list[str]) -> list[dict[str, str]]:
    try:
        rows = read_csv(path)
    except (csv.Error, UnicodeDecodeError) as exc:
        raise ParseError(f"Unreadable CSV: {exc}", path=path) from exc
    if not rows:
        raise ParseError("CSV has no data rows", path=path)
    missing = set(columns) - set(rows[0])
    if missing:
        raise ParseError(f"Missing column(s) {sorted(missing)}", path=path)
    return rows


def _read_summary(path: Path) -> list[SummaryRow]:
    try:
        summaries = [SummaryRow.model_validate(row) for row in _rows(path, SUMMARY_COLUMNS)]
    except ValidationError as exc:
        raise ParseError(f"Bad summary values: {exc.error_count()} error(s)", path=path) from exc
    if any(not math.isfinite(s.mean_error) for s in summaries):
        raise ParseError("Non-finite mean error", path=path)
    return summaries


def _read_pck(path: Path) -> PckSeries:
    rows = _rows(path, PCK_COLUMNS)
    try:
        thresholds = [float(row["threshold"]) for row in rows]
        fractions = [float(row["fraction"]) for row in rows]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"Bad PCK values: {exc}", path=path) from exc
    return PckSeries(name=rows[0]["name"], thresholds=thresholds, fractions=fractions)


def _read_params(path: Path) -> CollectionParams:
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (yaml.YAMLError, UnicodeDecodeError) as exc:
        raise ParseError(f"Unreadable parameter file: {exc}", path=path) from exc
    if not isinstance(data, dict) or "lambda" not in data or "gamma" not in data:
        raise ParseError("Parameter file needs 'lambda' and 'gamma'", path=path)
    try:
        return CollectionParams(
            collection=str(data.get("collection") or path.parent.name),
            lambda_=data["lambda"],
            gamma=data["gamma"],
        )
    except ValidationError as exc:
        raise ParseError(f"Bad parameter values: {exc.error_count()} error(s)", path=path) from exc


def collect_results(results_dir: str | Path) -> ReportData:
    """Scan ``results_dir`` recursively for result files.

    ``*.summary.csv`` and ``*.pck.csv`` come from ``eval``, ``*params.yaml``
    from ``adapt``. Malformed files are skipped with a warning and listed
    in :attr:`ReportData.skipped`.

    Raises:
        EmptyInput: If no usable result is found.
    """
    root = Path(results_dir)
    data = ReportData()
    readers = (
        ("*.summary.csv", lambda p: data.summaries.extend(_read_summary(p))),
        ("*.pck.csv", lambda p: data.curves.append(_read_pck(p))),
        ("*params.yaml", lambda p: data.params.append(_read_params(p))),
    )
    for pattern, read in readers:
        for path in sorted(root.rglob(pattern)):
            try:
                read(path)
            except ParseError as exc:
                logger.warning("Skipping %s: %s", path, exc)
                data.skipped.append(str(path.relative_to(root)))

    if not (data.summaries or data.curves or data.params):
        raise EmptyInput(f"No usable results found under {root}")
    return data

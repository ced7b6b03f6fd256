"""SVG charts drawn with matplotlib.

Figures are built on ``matplotlib.figure.Figure`` directly, so no pyplot
state or GUI backend is involved. A fixed hash salt and an empty date keep
reruns byte-identical.
"""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib
from matplotlib.figure import Figure

from fmapforge.reporting.aggregate import CollectionParams, PckSeries, ReportData, SummaryRow
from fmapforge.utils.file_utils import write_csv, write_file

FIGSIZE = (8.0, 5.0)

SVG_RC = {
    "svg.hashsalt": "fmapforge",
    "svg.fonttype": "none",
    "text.parse_math": False,
}


def _add_footer(fig: Figure, footer: list[str] | None) -> None:
    if footer:
        fig.text(0.01, 0.01, "\n".join(footer), fontsize=7, color="0.4", va="bottom", gid="footer")


def _to_svg(fig: Figure) -> str:
    buffer = io.BytesIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue().decode("utf-8")


def render_pck_svg(curves: list[PckSeries], footer: list[str] | None = None) -> str:
    """Line plot of PCK curves, error ×100 on the x axis."""
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=FIGSIZE)
        ax = fig.add_subplot()
        for i, curve in enumerate(curves):
            (line,) = ax.plot(
                [100.0 * t for t in curve.thresholds],
                curve.fractions,
                label=curve.name,
                linewidth=1.5,
            )
            line.set_gid(f"pck-curve-{i}")
        ax.set_xlabel("geodesic error ×100")
        ax.set_ylabel("fraction of correspondences")
        ax.set_ylim(0.0, 1.0)
        ax.set_xlim(left=0.0)
        ax.grid(True, alpha=0.3)
        if curves:
            ax.legend(loc="lower right", fontsize=8)
        _add_footer(fig, footer)
        fig.tight_layout(rect=(0.0, 0.06 if footer else 0.0, 1.0, 1.0))
        return _to_svg(fig)


def render_params_svg(params: list[CollectionParams], footer: list[str] | None = None) -> str:
    """Bar charts of adapted λ (log scale) and γ per collection."""
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=FIGSIZE)
        ax_lambda, ax_gamma = fig.subplots(2, 1, sharex=True)
        positions = list(range(len(params)))

        lambdas = ax_lambda.bar(positions, [p.lambda_ for p in params], color="tab:blue")
        ax_lambda.set_yscale("log")
        ax_lambda.set_ylabel("λ")
        ax_lambda.bar_label(lambdas, fmt="%.3g", fontsize=8)

        gammas = ax_gamma.bar(positions, [p.gamma for p in params], color="tab:orange")
        ax_gamma.set_ylim(0.0, 1.05)
        ax_gamma.set_ylabel("γ")
        ax_gamma.bar_label(gammas, fmt="%.3f", fontsize=8)
        ax_gamma.set_xticks(positions, [p.collection for p in params])

        for i, (lam_bar, gam_bar) in enumerate(zip(lambdas, gammas)):
            lam_bar.set_gid(f"lambda-bar-{i}")
            gam_bar.set_gid(f"gamma-bar-{i}")
        for ax in (ax_lambda, ax_gamma):
            ax.grid(True, axis="y", alpha=0.3)
        _add_footer(fig, footer)
        fig.tight_layout(rect=(0.0, 0.06 if footer else 0.0, 1.0, 1.0))
        return _to_svg(fig)


def write_report(data: ReportData, output_dir: str | Path) -> list[Path]:
    """Write the aggregated summary CSV and one SVG per metric.

    Returns:
        Paths written, in a fixed order.
    """
    output_dir = Path(output_dir)
    footer = [f"skipped: {name}" for name in data.skipped]
    written: list[Path] = []
    if data.summaries:
        written.append(
            write_csv(
                output_dir / "report_summary.csv",
                list(SummaryRow.model_fields),
                (s.model_dump() for s in sorted(data.summaries, key=lambda s: s.name)),
            )
        )
    if data.curves:
        curves = sorted(data.curves, key=lambda c: c.name)
        written.append(write_file(output_dir / "pck.svg", render_pck_svg(curves, footer)))
    if data.params:
        params = sorted(data.params, key=lambda p: p.collection)
        written.append(write_file(output_dir / "params.svg", render_params_svg(params, footer)))
    return written

"""Main CLI entrypoint for FmapForge.

Uses Click for command-line interface. All user-facing output
goes through rich.console, never print().

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import TYPE_CHECKING, Any

import click
import yaml
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape

from fmapforge import __version__
from fmapforge.exceptions import FmapForgeError

if TYPE_CHECKING:
    from fmapforge.config.settings import FmapForgeConfig
    from fmapforge.schema import EvalResult, SolverParams, SpectralBasis, TriangleMesh

console = Console()

BUNDLED_PREFIX = "bundled:"
MAP_SOURCES = ("features", "fmap")


def _configure_logging(verbose: bool) -> None:
    """Route package logs through the shared console."""
    package_logger = logging.getLogger("fmapforge")
    package_logger.handlers = [RichHandler(console=console, show_path=False, show_time=False)]
    package_logger.setLevel(logging.DEBUG if verbose else logging.WARNING)


@contextmanager
def _handled_errors() -> Iterator[None]:
    """Print library errors and exit with their code."""
    try:
        yield
    except FmapForgeError as exc:
        console.print(f"[bold red]Error:[/bold red] {escape(str(exc))}")
        raise SystemExit(exc.exit_code) from exc


@click.group()
@click.version_option(version=__version__, prog_name="fmapforge")
@click.option("--config", "config_path", type=click.Path(exists=True), help="Config YAML file")
@click.option("-v", "--verbose", is_flag=True, help="Verbose logging")
@click.pass_context
def app(ctx: click.Context, config_path: str | None, verbose: bool) -> None:
    """FmapForge: spectral non-rigid shape matching with a self-adaptive solver."""
    _configure_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["verbose"] = verbose


def _load_config(ctx: click.Context, **overrides: Any) -> FmapForgeConfig:
    from fmapforge.config.settings import load_config, with_overrides

    return with_overrides(load_config(ctx.obj.get("config_path")), **overrides)


def _load_mesh(source: str) -> TriangleMesh:
    """Load a mesh file, or a bundled mesh named ``bundled:<name>``."""
    from fmapforge.mesh.io import load_mesh
    from fmapforge.mesh.primitives import bundled_mesh

    if source.startswith(BUNDLED_PREFIX):
        return bundled_mesh(source[len(BUNDLED_PREFIX) :])
    return load_mesh(source)


def _mesh_label(source: str) -> str:
    if source.startswith(BUNDLED_PREFIX):
        return source[len(BUNDLED_PREFIX) :]
    return Path(source).stem


def _basis(mesh: TriangleMesh, k: int, cfg: FmapForgeConfig, use_cache: bool) -> SpectralBasis:
    from fmapforge.spectral.cache import BasisCache, basis_for

    cache = BasisCache(cfg.cache_dir) if use_cache else None
    _, basis = basis_for(mesh, k, cache=cache)
    return basis


# ---------------------------------------------------------------------------
# precompute
# ---------------------------------------------------------------------------


@app.command()
@click.argument("meshes", nargs=-1, required=True)
@click.option("--k", type=int, help="Number of eigenpairs")
@click.option("--cache-dir", type=click.Path(file_okay=False), help="Basis cache directory")
@click.option("--jobs", type=int, help="Meshes processed in parallel")
@click.pass_context
def precompute(
    ctx: click.Context,
    meshes: tuple[str, ...],
    k: int | None,
    cache_dir: str | None,
    jobs: int | None,
) -> None:
    """Compute and cache spectral bases for MESHES."""
    with _handled_errors():
        cfg = _load_config(ctx, k=k, cache_dir=cache_dir, jobs=jobs)
        _run_precompute_pipeline(mesh_sources=list(meshes), cfg=cfg)


def _run_precompute_pipeline(*, mesh_sources: list[str], cfg: FmapForgeConfig) -> list[Path]:
    """Fill the basis cache for every mesh.

    Separated from CLI handler for testability.

    Returns:
        Cache file paths, in argument order.
    """
    from joblib import Parallel, delayed

    from fmapforge.spectral.cache import BasisCache

    cache = BasisCache(cfg.cache_dir)
    k = cfg.solver.k

    def one(source: str) -> tuple[Path, bool]:
        mesh = _load_mesh(source)
        _, hit = cache.get_or_compute(mesh, k)
        return cache.path_for(mesh, k), hit

    with console.status("[bold cyan]Computing spectral bases..."):
        results = Parallel(n_jobs=cfg.jobs, prefer="threads")(
            delayed(one)(source) for source in mesh_sources
        )

    for source, (path, hit) in zip(mesh_sources, results):
        state = "[dim]cached[/dim]" if hit else "[green]computed[/green]"
        console.print(f"{state} {escape(_mesh_label(source))} → {path}")
    return [path for path, _ in results]


# ---------------------------------------------------------------------------
# match
# ---------------------------------------------------------------------------


@app.command()
@click.argument("mesh_x")
@click.argument("mesh_y")
@click.option("--output-dir", type=click.Path(file_okay=False), help="Output directory")
@click.option("--k", type=int, help="Basis size used by the solver")
@click.option("--lambda", "lambda_", type=float, help="Regularisation strength λ")
@click.option("--gamma", type=float, help="Resolvent mask shape γ")
@click.option("--mask", type=click.Choice(["standard", "resolvent"]), help="Mask kind")
@click.option("--descriptor", type=click.Choice(["wks", "hks"]), help="Descriptor kind")
@click.option("--features-x", type=click.Path(exists=True), help="External features for X")
@click.option("--features-y", type=click.Path(exists=True), help="External features for Y")
@click.option(
    "--map-source",
    type=click.Choice(MAP_SOURCES),
    default="fmap",
    show_default=True,
    help="Which point map is written as pointmap.txt",
)
@click.option("--refine/--no-refine", default=None, help="Spectral upsampling refinement")
@click.option("--eval", "run_eval", is_flag=True, help="Evaluate against --gt")
@click.option("--gt", type=click.Path(exists=True), help="Ground-truth correspondence Y → X")
@click.option("--no-cache", is_flag=True, help="Do not read or write the basis cache")
@click.pass_context
def match(
    ctx: click.Context,
    mesh_x: str,
    mesh_y: str,
    output_dir: str | None,
    k: int | None,
    lambda_: float | None,
    gamma: float | None,
    mask: str | None,
    descriptor: str | None,
    features_x: str | None,
    features_y: str | None,
    map_source: str,
    refine: bool | None,
    run_eval: bool,
    gt: str | None,
    no_cache: bool,
) -> None:
    """Match MESH_Y to MESH_X and write maps and losses."""
    with _handled_errors():
        cfg = _load_config(
            ctx, k=k, gamma=gamma, mask_kind=mask, descriptor=descriptor, **{"lambda": lambda_}
        )
        if refine is not None:
            cfg = cfg.model_copy(
                update={"refinement": cfg.refinement.model_copy(update={"enabled": refine})}
            )
        _run_match_pipeline(
            mesh_x=mesh_x,
            mesh_y=mesh_y,
            output_dir=output_dir,
            cfg=cfg,
            features_x=features_x,
            features_y=features_y,
            map_source=map_source,
            run_eval=run_eval,
            gt_path=gt,
            use_cache=not no_cache,
        )


def _run_match_pipeline(
    *,
    mesh_x: str,
    mesh_y: str,
    output_dir: str | None,
    cfg: FmapForgeConfig,
    features_x: str | None = None,
    features_y: str | None = None,
    map_source: str = "fmap",
    run_eval: bool = False,
    gt_path: str | None = None,
    use_cache: bool = True,
) -> dict[str, Path]:
    """Execute the full matching pipeline.

    Separated from CLI handler for testability. Every input is validated
    before the first file is written.

    Returns:
        Written files keyed by role.
    """
    from fmapforge.conversion.io import save_fmap, save_pointmap
    from fmapforge.conversion.pointmaps import PointMapMode
    from fmapforge.descriptors.external import load_features
    from fmapforge.descriptors.signatures import compute_descriptor
    from fmapforge.evaluation.metrics import default_thresholds, evaluate, write_eval_results
    from fmapforge.exceptions import InvalidArgument, LengthMismatch
    from fmapforge.mesh.io import load_correspondence
    from fmapforge.utils.file_utils import resolve_output_dir, write_csv
    from fmapforge.utils.tables import display_evaluation, display_loss_reports

    if run_eval and gt_path is None:
        raise InvalidArgument("--eval needs a ground-truth file via --gt")
    if (features_x is None) != (features_y is None):
        raise InvalidArgument("Pass both --features-x and --features-y, or neither")
    if run_eval and map_source == "features" and cfg.pointmap_mode is PointMapMode.SOFTMAX:
        raise InvalidArgument("Evaluation needs a hard map; use --map-source fmap")

    with console.status("[bold cyan]Loading meshes..."):
        mx, my = _load_mesh(mesh_x), _load_mesh(mesh_y)
    ground_truth = load_correspondence(gt_path) if gt_path is not None else None
    if ground_truth is not None and ground_truth.shape[0] != my.n:
        raise LengthMismatch(
            f"Ground truth has {ground_truth.shape[0]} entries but Y has {my.n} vertices"
        )

    k = cfg.solver.k
    k_basis = max(k, cfg.refinement.k_end) if cfg.refinement.enabled else k
    with console.status("[bold cyan]Computing spectral bases..."):
        basis_x = _basis(mx, k_basis, cfg, use_cache)
        basis_y = _basis(my, k_basis, cfg, use_cache)
    bx, by = basis_x.truncate(k), basis_y.truncate(k)

    with console.status("[bold cyan]Computing descriptors..."):
        if features_x is not None and features_y is not None:
            fx, fy = load_features(features_x, bx), load_features(features_y, by)
        else:
            fx = compute_descriptor(bx, cfg.descriptor, cfg.descriptor_size, cfg.variance_scale)
            fy = compute_descriptor(by, cfg.descriptor, cfg.descriptor_size, cfg.variance_scale)

    with console.status("[bold cyan]Solving functional maps..."):
        maps = _solve_and_recover(fx, fy, basis_x, basis_y, cfg)
    primary = maps[f"pi_{map_source}"]

    name = f"{_mesh_label(mesh_x)}_{_mesh_label(mesh_y)}"
    result: EvalResult | None = None
    if ground_truth is not None and run_eval:
        thresholds = default_thresholds(cfg.pck_max_threshold, cfg.pck_points)
        with console.status("[bold cyan]Evaluating..."):
            result = evaluate(primary, ground_truth, mx, thresholds, jobs=cfg.jobs)

    out_dir = resolve_output_dir(output_dir, name)
    written: dict[str, Path] = {}
    written["fmap_xy"], _ = save_fmap(maps["c_xy"], out_dir / "fmap_xy")
    written["fmap_yx"], _ = save_fmap(maps["c_yx"], out_dir / "fmap_yx")
    for source in MAP_SOURCES:
        written[f"pointmap_{source}"] = save_pointmap(
            maps[f"pi_{source}"], out_dir / f"pointmap_{source}"
        )
    written["pointmap"] = save_pointmap(primary, out_dir / "pointmap")

    reports = maps["reports"]
    written["losses"] = write_csv(
        out_dir / "losses.csv",
        ["source", "bij", "orth", "couple", "contrast_x", "contrast_y", "total"],
        ({"source": source, **report.model_dump()} for source, report in reports.items()),
    )
    display_loss_reports(reports, out=console)

    if result is not None and ground_truth is not None:
        for path in write_eval_results(result, primary, ground_truth, out_dir, name):
            written[path.name] = path
        display_evaluation(result, name, out=console)

    console.print(f"[bold]Results written to:[/bold] {out_dir}")
    return written


def _solve_and_recover(
    fx: Any, fy: Any, basis_x: SpectralBasis, basis_y: SpectralBasis, cfg: FmapForgeConfig
) -> dict[str, Any]:
    """Solve both map directions and recover point maps from both sources."""
    from fmapforge.conversion.pointmaps import (
        fmap_from_pointmap,
        pointmap_from_features,
        pointmap_from_fmap,
    )
    from fmapforge.conversion.refine import refine_spectral_upsampling
    from fmapforge.losses.terms import loss_contrastive, loss_report
    from fmapforge.schema import FunctionalMap
    from fmapforge.solver.fmap import solve_fmap
    from fmapforge.solver.masks import build_mask

    params = cfg.solver
    k = params.k
    bx, by = basis_x.truncate(k), basis_y.truncate(k)
    mask_xy = build_mask(params.mask_kind, bx.evals, by.evals, params.gamma)
    mask_yx = build_mask(params.mask_kind, by.evals, bx.evals, params.gamma)
    c_xy = solve_fmap(fx.coefficients, fy.coefficients, mask_xy, params.lambda_)
    c_yx = solve_fmap(fy.coefficients, fx.coefficients, mask_yx, params.lambda_)

    def feature_map(f_target: Any, f_source: Any) -> Any:
        return pointmap_from_features(
            f_target,
            f_source,
            cfg.pointmap_mode,
            params.tau,
            backend=cfg.nn_backend,
            top_t=cfg.softmax_top_t,
        )

    def spectral_map(fmap: FunctionalMap, b_x: SpectralBasis, b_y: SpectralBasis) -> Any:
        refinement = cfg.refinement
        if not refinement.enabled:
            return pointmap_from_fmap(fmap, b_x.truncate(k), b_y.truncate(k), cfg.nn_backend)
        start = min(refinement.k_start, k)
        initial = FunctionalMap(matrix=fmap.matrix[:start, :start], provenance=fmap.provenance)
        _, pi = refine_spectral_upsampling(
            initial, b_x, b_y, start, refinement.k_end, refinement.step, cfg.nn_backend
        )
        return pi

    pi_features_yx, pi_features_xy = feature_map(fx, fy), feature_map(fy, fx)
    pi_fmap_yx = spectral_map(c_xy, basis_x, basis_y)
    pi_fmap_xy = spectral_map(c_yx, basis_y, basis_x)

    contrast_x = loss_contrastive(fx, bx, params.tau)
    contrast_y = loss_contrastive(fy, by, params.tau)
    reports = {}
    for source, (pi_yx, pi_xy) in {
        "features": (pi_features_yx, pi_features_xy),
        "fmap": (pi_fmap_yx, pi_fmap_xy),
    }.items():
        reports[source] = loss_report(
            c_xy,
            c_yx,
            fmap_from_pointmap(pi_yx, bx, by).matrix,
            fmap_from_pointmap(pi_xy, by, bx).matrix,
            contrast_x,
            contrast_y,
            params.weights,
        )
    return {
        "c_xy": c_xy,
        "c_yx": c_yx,
        "pi_features": pi_features_yx,
        "pi_fmap": pi_fmap_yx,
        "reports": reports,
    }


# ---------------------------------------------------------------------------
# adapt
# ---------------------------------------------------------------------------


@app.command()
@click.argument("pairs_file", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--synthetic", help="Base mesh for a synthetic near-isometric collection")
@click.option("--pairs", "n_pairs", type=int, default=5, show_default=True, help="Synthetic pairs")
@click.option("--seed", type=int, default=0, show_default=True, help="Random seed")
@click.option("--collection", help="Collection name (defaults to the file stem)")
@click.option("--output-dir", type=click.Path(file_okay=False), help="Output directory")
@click.option("--steps", type=int, help="Iteration budget")
@click.option("--step-size", type=float, help="Initial step size or learning rate")
@click.option("--optimizer", type=click.Choice(["gd", "adam"]), help="Update rule")
@click.option("--k", type=int, help="Basis size")
@click.option("--mask", type=click.Choice(["standard", "resolvent"]), help="Mask kind")
@click.option("--jobs", type=int, help="Pairs evaluated in parallel")
@click.pass_context
def adapt(
    ctx: click.Context,
    pairs_file: str | None,
    synthetic: str | None,
    n_pairs: int,
    seed: int,
    collection: str | None,
    output_dir: str | None,
    steps: int | None,
    step_size: float | None,
    optimizer: str | None,
    k: int | None,
    mask: str | None,
    jobs: int | None,
) -> None:
    """Adapt λ and γ on a collection of pairs listed in PAIRS_FILE.

    Each line of PAIRS_FILE names two meshes separated by whitespace.
    """
    with _handled_errors():
        cfg = _load_config(ctx, k=k, mask_kind=mask, jobs=jobs)
        adapt_cfg = _adapt_overrides(cfg.adapt, steps, step_size, optimizer)
        _run_adapt_pipeline(
            pairs_file=pairs_file,
            synthetic=synthetic,
            n_pairs=n_pairs,
            seed=seed,
            collection=collection,
            output_dir=output_dir,
            cfg=cfg.model_copy(update={"adapt": adapt_cfg}),
        )


def _adapt_overrides(
    adapt_cfg: Any, steps: int | None, step_size: float | None, optimizer: str | None
) -> Any:
    """Apply flag values; --step-size sets the learning rate of the chosen optimizer."""
    from fmapforge.solver.adapt import Optimizer

    update: dict[str, Any] = {}
    if steps is not None:
        update["steps"] = steps
    if optimizer is not None:
        update["optimizer"] = Optimizer(optimizer)
    chosen = update.get("optimizer", adapt_cfg.optimizer)
    if step_size is not None:
        key = "adam_learning_rate" if chosen is Optimizer.ADAM else "step_size"
        update[key] = step_size
    return adapt_cfg.model_copy(update=update)


def read_pairs_file(path: str | Path) -> list[tuple[str, str]]:
    """Parse a pair list: two mesh paths per line, ``#`` comments ignored.

    Relative paths are resolved against the file's directory.
    """
    from fmapforge.exceptions import EmptyInput, ParseError
    from fmapforge.utils.file_utils import read_file

    pairs_path = Path(path)
    pairs: list[tuple[str, str]] = []
    for lineno, raw in enumerate(read_file(pairs_path).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise ParseError("Expected two mesh paths per line", pairs_path, lineno)
        resolved = [
            t if t.startswith(BUNDLED_PREFIX) or Path(t).is_absolute()
            else str(pairs_path.parent / t)
            for t in tokens
        ]
        pairs.append((resolved[0], resolved[1]))
    if not pairs:
        raise EmptyInput(f"No pairs listed in {pairs_path}")
    return pairs


def _run_adapt_pipeline(
    *,
    pairs_file: str | None,
    synthetic: str | None,
    n_pairs: int,
    seed: int,
    collection: str | None,
    output_dir: str | None,
    cfg: FmapForgeConfig,
) -> dict[str, Path]:
    """Build pair problems, adapt (λ, γ) and write the trace and parameters.

    Separated from CLI handler for testability. On a non-finite loss the
    last good parameters and the partial trace are still written.
    """
    import numpy as np
    from joblib import Parallel, delayed

    from fmapforge.descriptors.signatures import compute_descriptor
    from fmapforge.exceptions import InvalidArgument, NonFiniteLoss
    from fmapforge.mesh.transforms import smooth_deformation
    from fmapforge.solver.adapt import Optimizer, PairProblem, adapt_params, assert_monotone
    from fmapforge.utils.file_utils import resolve_output_dir
    from fmapforge.utils.tables import display_params

    if (pairs_file is None) == (synthetic is None):
        raise InvalidArgument("Pass either PAIRS_FILE or --synthetic BASE")
    if synthetic is not None and n_pairs < 1:
        raise InvalidArgument(f"--pairs must be positive, got {n_pairs}")

    params = cfg.solver
    if pairs_file is not None:
        name = collection or Path(pairs_file).stem
        sources = read_pairs_file(pairs_file)
        meshes = [(_load_mesh(a), _load_mesh(b)) for a, b in sources]
    else:
        assert synthetic is not None
        name = collection or _mesh_label(synthetic)
        base = _load_mesh(synthetic)
        rng = np.random.default_rng(seed)
        meshes = [(base, smooth_deformation(base, rng)) for _ in range(n_pairs)]

    def problem(i: int, mx: TriangleMesh, my: TriangleMesh) -> PairProblem:
        bx, by = _basis(mx, params.k, cfg, True), _basis(my, params.k, cfg, True)
        fx = compute_descriptor(bx, cfg.descriptor, cfg.descriptor_size, cfg.variance_scale)
        fy = compute_descriptor(by, cfg.descriptor, cfg.descriptor_size, cfg.variance_scale)
        return PairProblem.from_features(fx, fy, bx, by, params, name=f"{name}-{i}")

    with console.status("[bold cyan]Preparing pairs..."):
        problems = Parallel(n_jobs=cfg.jobs, prefer="threads")(
            delayed(problem)(i, mx, my) for i, (mx, my) in enumerate(meshes)
        )

    out_dir = resolve_output_dir(output_dir, f"adapt_{name}")
    adapt_cfg = cfg.adapt
    step_size = (
        adapt_cfg.adam_learning_rate
        if adapt_cfg.optimizer is Optimizer.ADAM
        else adapt_cfg.step_size
    )
    try:
        with console.status(f"[bold cyan]Adapting λ, γ on {len(problems)} pair(s)..."):
            result = adapt_params(
                problems,
                params,
                adapt_cfg.steps,
                step_size,
                optimizer=adapt_cfg.optimizer,
                jobs=cfg.jobs,
            )
    except NonFiniteLoss as exc:
        if exc.last_params is not None:
            _write_adapt_outputs(out_dir, name, exc.last_params, exc.trace)
            console.print(f"[yellow]Last good parameters saved to {out_dir}[/yellow]")
        raise

    written = _write_adapt_outputs(out_dir, name, result.params, result.trace)
    assert_monotone(result.trace)
    display_params(result.params, out=console)
    console.print(
        f"[bold green]Done![/bold green] {len(result.trace) - 1} accepted step(s), "
        f"stopped: {result.stop_reason}"
    )
    return written


def _write_adapt_outputs(
    out_dir: Path, collection: str, params: SolverParams, trace: list[Any]
) -> dict[str, Path]:
    from fmapforge.solver.adapt import TRACE_COLUMNS
    from fmapforge.utils.file_utils import write_csv, write_file

    data = {"collection": collection, **params.model_dump(mode="json", by_alias=True)}
    return {
        "trace": write_csv(out_dir / "trace.csv", TRACE_COLUMNS, (e.as_row() for e in trace)),
        "params": write_file(
            out_dir / "params.yaml", yaml.dump(data, default_flow_style=False, sort_keys=True)
        ),
    }


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


@app.command(name="eval")
@click.argument("predicted", type=click.Path(exists=True, dir_okay=False))
@click.argument("ground_truth", type=click.Path(exists=True, dir_okay=False))
@click.option("--mesh-x", required=True, help="Target mesh X of the point map")
@click.option("--name", help="Result name (defaults to the predicted file stem)")
@click.option("--output-dir", type=click.Path(file_okay=False), help="Output directory")
@click.option("--jobs", type=int, help="Threads for geodesic fields")
@click.pass_context
def eval_command(
    ctx: click.Context,
    predicted: str,
    ground_truth: str,
    mesh_x: str,
    name: str | None,
    output_dir: str | None,
    jobs: int | None,
) -> None:
    """Score a PREDICTED hard map against GROUND_TRUTH on --mesh-x."""
    with _handled_errors():
        cfg = _load_config(ctx, jobs=jobs)
        _run_eval_pipeline(
            predicted=predicted,
            ground_truth=ground_truth,
            mesh_x=mesh_x,
            name=name or Path(predicted).stem,
            output_dir=output_dir,
            cfg=cfg,
        )


def _run_eval_pipeline(
    *,
    predicted: str,
    ground_truth: str,
    mesh_x: str,
    name: str,
    output_dir: str | None,
    cfg: FmapForgeConfig,
) -> list[Path]:
    """Evaluate a stored point map and write the CSV results."""
    from fmapforge.conversion.io import load_pointmap
    from fmapforge.evaluation.metrics import default_thresholds, evaluate, write_eval_results
    from fmapforge.mesh.io import load_correspondence
    from fmapforge.utils.file_utils import resolve_output_dir
    from fmapforge.utils.tables import display_evaluation

    mx = _load_mesh(mesh_x)
    pi = load_pointmap(predicted, n_target=mx.n)
    truth = load_correspondence(ground_truth)
    thresholds = default_thresholds(cfg.pck_max_threshold, cfg.pck_points)
    with console.status("[bold cyan]Computing geodesic errors..."):
        result = evaluate(pi, truth, mx, thresholds, jobs=cfg.jobs)

    out_dir = resolve_output_dir(output_dir, Path(predicted).parent)
    written = write_eval_results(result, pi, truth, out_dir, name)
    display_evaluation(result, name, out=console)
    return written


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


@app.command()
@click.option("--mesh", "mesh_sources", multiple=True, help="Mesh to check (repeatable)")
@click.option("--k", "ks", type=int, multiple=True, help="Basis size (repeatable)")
@click.option("--seeds", type=int, default=10, show_default=True, help="Seeds per instance")
@click.option("--seed", type=int, default=0, show_default=True, help="First seed")
@click.option("--output", type=click.Path(dir_okay=False), help="CSV file for the results")
def verify(
    mesh_sources: tuple[str, ...],
    ks: tuple[int, ...],
    seeds: int,
    seed: int,
    output: str | None,
) -> None:
    """Numerically check the map-relation results on small instances."""
    with _handled_errors():
        failed = _run_verify_pipeline(
            mesh_sources=list(mesh_sources), ks=list(ks), seeds=seeds, seed=seed, output=output
        )
    if failed:
        raise SystemExit(3)


def _run_verify_pipeline(
    *,
    mesh_sources: list[str],
    ks: list[int],
    seeds: int,
    seed: int,
    output: str | None,
) -> int:
    """Run both checks, print the table and return the failure count."""
    from fmapforge.exceptions import InvalidArgument
    from fmapforge.mesh.primitives import BUNDLED_MESHES
    from fmapforge.theory.checks import run_verification
    from fmapforge.utils.file_utils import write_csv
    from fmapforge.utils.tables import display_verification

    if seeds < 1:
        raise InvalidArgument(f"--seeds must be positive, got {seeds}")
    sources = mesh_sources or [f"{BUNDLED_PREFIX}{name}" for name in BUNDLED_MESHES]
    meshes = {_mesh_label(source): _load_mesh(source) for source in sources}
    with console.status("[bold cyan]Running checks..."):
        outcomes = run_verification(
            meshes, ks or [2, 5, 10], list(range(seed, seed + seeds))
        )
    if output is not None:
        write_csv(
            output,
            ["check", "instance", "passed", "metric", "value"],
            (o.model_dump() for o in outcomes),
        )
    display_verification(outcomes, out=console)
    return sum(not o.passed for o in outcomes)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@app.command()
@click.argument("results_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--output-dir", type=click.Path(file_okay=False), help="Report directory")
def report(results_dir: str, output_dir: str | None) -> None:
    """Aggregate evaluation and adaptation results under RESULTS_DIR."""
    with _handled_errors():
        _run_report_pipeline(results_dir=results_dir, output_dir=output_dir)


def _run_report_pipeline(*, results_dir: str, output_dir: str | None) -> list[Path]:
    """Collect results and write the summary CSV and SVG charts."""
    from fmapforge.reporting.aggregate import collect_results
    from fmapforge.reporting.svg import write_report
    from fmapforge.utils.file_utils import resolve_output_dir

    data = collect_results(results_dir)
    written = write_report(data, resolve_output_dir(output_dir, Path(results_dir) / "report"))
    for path in written:
        console.print(f"[bold]Wrote:[/bold] {path}")
    for skipped in data.skipped:
        console.print(f"[yellow]Skipped malformed file:[/yellow] {escape(skipped)}")
    return written


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


@app.command()
@click.option("--set", "assignments", multiple=True, help="KEY=VALUE, dotted keys for sections")
@click.pass_context
def config(ctx: click.Context, assignments: tuple[str, ...]) -> None:
    """Show or update the FmapForge configuration."""
    from fmapforge.config.settings import load_config, save_config

    with _handled_errors():
        cfg = load_config(ctx.obj.get("config_path"))
        if not assignments:
            console.print("[bold]Current configuration:[/bold]")
            console.print(
                escape(yaml.dump(cfg.model_dump(mode="json", by_alias=True), sort_keys=True))
            )
            return
        updated = _apply_assignments(cfg, assignments)
        path = save_config(updated, ctx.obj.get("config_path"))
        console.print(f"[bold green]Configuration saved to:[/bold green] {path}")


def _apply_assignments(cfg: FmapForgeConfig, assignments: tuple[str, ...]) -> FmapForgeConfig:
    """Apply ``section.key=value`` assignments; values are parsed as YAML scalars."""
    from fmapforge.config.settings import FmapForgeConfig
    from fmapforge.exceptions import InvalidArgument

    data = cfg.model_dump(mode="json", by_alias=True)
    for assignment in assignments:
        key, sep, raw = assignment.partition("=")
        if not sep or not key:
            raise InvalidArgument(f"Expected KEY=VALUE, got '{assignment}'")
        *sections, leaf = key.strip().split(".")
        node = data
        for section in sections:
            if not isinstance(node.get(section), dict):
                raise InvalidArgument(f"Unknown config section '{section}'")
            node = node[section]
        if leaf not in node:
            raise InvalidArgument(f"Unknown config key '{key}'")
        node[leaf] = yaml.safe_load(raw)
    try:
        return FmapForgeConfig.model_validate(data)
    except ValueError as exc:
        raise InvalidArgument(f"Invalid configuration: {exc}") from exc


if __name__ == "__main__":
    app()

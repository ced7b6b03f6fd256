"""Configuration management for FmapForge.

Config is stored at ~/.fmapforge/config.yaml (or any path given with
``--config``) and loaded at startup. Defaults equal the published solver
settings: λ₀ = 100, γ₀ = 0.5, τ = 0.07 and loss weights 1/1/1/10.

Priority: CLI flags > env vars > config file > defaults.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, Field, ValidationError

from fmapforge.conversion.pointmaps import NNBackend, PointMapMode
from fmapforge.descriptors.signatures import (
    DEFAULT_VARIANCE_SCALE,
    DEFAULT_WKS_ENERGIES,
    DescriptorKind,
)
from fmapforge.exceptions import InvalidArgument, ParseError
from fmapforge.schema import SolverParams
from fmapforge.solver.adapt import Optimizer

CONFIG_DIR = Path.home() / ".fmapforge"
CONFIG_FILE = CONFIG_DIR / "config.yaml"

DEFAULT_CACHE_DIR = CONFIG_DIR / "cache"


class RefinementConfig(BaseModel):
    """Spectral upsampling schedule."""

    enabled: bool = True
    k_start: int = Field(default=10, ge=1)
    k_end: int = Field(default=30, ge=1)
    step: int = Field(default=5, ge=1)


class AdaptConfig(BaseModel):
    """Self-adaptive parameter search settings."""

    steps: int = Field(default=50, ge=0)
    step_size: float = Field(default=0.1, gt=0)
    optimizer: Optimizer = Optimizer.GD
    adam_learning_rate: float = Field(default=1e-3, gt=0)


class FmapForgeConfig(BaseModel):
    """Application configuration."""

    solver: SolverParams = Field(default_factory=SolverParams)
    descriptor: DescriptorKind = DescriptorKind.WKS
    descriptor_size: int = Field(default=DEFAULT_WKS_ENERGIES, ge=1)
    variance_scale: float = Field(default=DEFAULT_VARIANCE_SCALE, gt=0)
    pointmap_mode: PointMapMode = PointMapMode.HARD_NN
    softmax_top_t: int | None = Field(default=None, ge=1)
    nn_backend: NNBackend = NNBackend.BRUTE
    refinement: RefinementConfig = Field(default_factory=RefinementConfig)
    adapt: AdaptConfig = Field(default_factory=AdaptConfig)
    pck_max_threshold: float = Field(default=0.2, gt=0)
    pck_points: int = Field(default=200, ge=2)
    cache_dir: str = str(DEFAULT_CACHE_DIR)
    jobs: int = Field(default=1, ge=1)


def _read_yaml(path: Path) -> dict[str, Any]:
    try:
        file_data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(
            f"Invalid YAML in {path}: {exc}",
            path=str(path),
            line=mark.line + 1 if mark is not None else None,
        ) from exc
    if file_data is None:
        return {}
    if not isinstance(file_data, dict):
        raise ParseError(f"Config file {path} must contain a mapping", path=str(path))
    return file_data


def _validate(data: dict[str, Any]) -> FmapForgeConfig:
    try:
        return FmapForgeConfig.model_validate(data)
    except ValidationError as exc:
        raise InvalidArgument(f"Invalid configuration: {exc}") from exc


def load_config(path: str | Path | None = None) -> FmapForgeConfig:
    """Load configuration from file and environment variables.

    Priority: env vars > config file > defaults.

    Args:
        path: Explicit config file, ``CONFIG_FILE`` when None.

    Returns:
        A validated FmapForgeConfig instance.

    Raises:
        ParseError: If the file is not a YAML mapping.
        InvalidArgument: If a value fails validation.
    """
    # Start with defaults
    data: dict[str, Any] = {}

    # Layer 2: Override with config file if exists
    config_file = Path(path) if path is not None else CONFIG_FILE
    if config_file.exists():
        data.update(_read_yaml(config_file))

    # Layer 3: Override with env vars
    solver = dict(data.get("solver") or {})

    env_k = os.environ.get("FMAPFORGE_K")
    if env_k:
        solver["k"] = env_k

    env_mask = os.environ.get("FMAPFORGE_MASK")
    if env_mask:
        solver["mask_kind"] = env_mask

    if solver:
        data["solver"] = solver

    env_cache = os.environ.get("FMAPFORGE_CACHE_DIR")
    if env_cache:
        data["cache_dir"] = env_cache

    env_jobs = os.environ.get("FMAPFORGE_JOBS")
    if env_jobs:
        data["jobs"] = env_jobs

    return _validate(data)


def with_overrides(config: FmapForgeConfig, **solver_overrides: Any) -> FmapForgeConfig:
    """Return a copy with CLI flag values applied; None values are ignored.

    Keys ``k``, ``lambda``, ``gamma``, ``tau`` and ``mask_kind`` go to the
    solver section, everything else to the top level.
    """
    solver_keys = {"k", "lambda", "gamma", "tau", "mask_kind"}
    data = config.model_dump(mode="json", by_alias=True)
    for key, value in solver_overrides.items():
        if value is None:
            continue
        if key in solver_keys:
            data["solver"][key] = value
        else:
            data[key] = value
    return _validate(data)


def save_config(config: FmapForgeConfig, path: str | Path | None = None) -> Path:
    """Save configuration as YAML, to ``CONFIG_FILE`` unless ``path`` is given.

    Args:
        config: The configuration to persist.
        path: Explicit destination.

    Returns:
        The written path.
    """
    target = Path(path) if path is not None else CONFIG_FILE
    target.parent.mkdir(parents=True, exist_ok=True)

    data = config.model_dump(mode="json", by_alias=True)

    # Remove None values for cleaner YAML
    clean_data = {k: v for k, v in data.items() if v is not None}

    target.write_text(
        yaml.dump(clean_data, default_flow_style=False, sort_keys=True),
        encoding="utf-8",
    )
    return target

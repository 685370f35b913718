"""Pipeline configuration: hyperparameters and ablation switches.

A config file is TOML with flat top-level keys and an ``[ablation]`` table::

    k_exploit = 3
    mmr_lambda = 0.5
    top_k_eval = [5, 10, 20]

    [ablation]
    reflection_on = false

Every key is optional; omitted keys take the defaults below.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AblationFlags:
    annotation_on: bool = True
    exploration_on: bool = True
    reflection_on: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    # bundling (events per bundle; stride None means stride == window)
    bundle_window: int = 5
    bundle_stride: Optional[int] = None
    # motive retrieval
    k_exploit: int = 3
    k_div: int = 2
    k_social: int = 2
    mmr_lambda: float = 0.5
    # query synthesis and search
    queries_per_plan: int = 4
    retrieval_depth: int = 100
    rrf_constant: float = 60.0
    # reflection loop
    reflection_threshold: float = 0.8
    max_reflections: int = 2
    verifier_candidates: int = 10
    # evaluation and data
    top_k_eval: tuple = (5, 10, 20)
    min_rating: Optional[float] = 3.0
    min_count: int = 5
    exclude_history: bool = True
    embedding_dim: int = 256
    ablation: AblationFlags = field(default_factory=AblationFlags)

    @property
    def stride(self) -> int:
        return self.bundle_stride if self.bundle_stride is not None else self.bundle_window

    @property
    def effective_max_reflections(self) -> int:
        """Verdict-call budget after applying the reflection switch."""
        return self.max_reflections if self.ablation.reflection_on else 0

    def with_ablation(self, **flags) -> "PipelineConfig":
        return replace(self, ablation=replace(self.ablation, **flags))

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["top_k_eval"] = list(self.top_k_eval)
        return data

    def fingerprint(self) -> str:
        """Short stable hash of every field, logged with each run."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PipelineConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError([(name, "unknown key") for name in unknown])
        ablation = data.pop("ablation", None) or {}
        bad = sorted(set(ablation) - {f.name for f in fields(AblationFlags)})
        if bad:
            raise ConfigError([(f"ablation.{name}", "unknown key") for name in bad])
        if "top_k_eval" in data:
            data["top_k_eval"] = tuple(data["top_k_eval"])
        return cls(ablation=AblationFlags(**ablation), **data)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_real(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def validate_config(cfg: PipelineConfig) -> PipelineConfig:
    """Return ``cfg`` unchanged if every bound holds, else raise ConfigError.

    The error lists every violated field, not only the first. Enabling
    reflection with ``max_reflections = 0`` is legal but logged as a warning,
    since it silently degrades to a single pass.
    """
    problems = []

    def positive_int(name):
        value = getattr(cfg, name)
        if not _is_int(value) or value < 1:
            problems.append((name, f"must be a positive integer, got {value!r}"))

    for name in ("bundle_window", "k_exploit", "k_div", "k_social", "queries_per_plan",
                 "retrieval_depth", "verifier_candidates", "min_count", "embedding_dim"):
        positive_int(name)

    if cfg.bundle_stride is not None:
        s = cfg.bundle_stride
        if not _is_int(s) or s < 1 or (_is_int(cfg.bundle_window) and s > cfg.bundle_window):
            problems.append(("bundle_stride", f"must satisfy 1 <= stride <= bundle_window, got {s!r}"))

    for name in ("mmr_lambda", "reflection_threshold"):
        value = getattr(cfg, name)
        if not _is_real(value) or not 0.0 <= value <= 1.0:
            problems.append((name, f"must lie in [0, 1], got {value!r}"))

    if not _is_real(cfg.rrf_constant) or cfg.rrf_constant <= 0:
        problems.append(("rrf_constant", f"must be a positive real, got {cfg.rrf_constant!r}"))

    if not _is_int(cfg.max_reflections) or cfg.max_reflections < 0:
        problems.append(("max_reflections", f"must be a non-negative integer, got {cfg.max_reflections!r}"))

    cutoffs = cfg.top_k_eval
    if (not cutoffs or not all(_is_int(k) and k >= 1 for k in cutoffs)):
        problems.append(("top_k_eval", f"must be a non-empty list of positive integers, got {cutoffs!r}"))
    elif any(a >= b for a, b in zip(cutoffs, cutoffs[1:])):
        problems.append(("top_k_eval", f"must be strictly increasing, got {list(cutoffs)!r}"))

    if cfg.min_rating is not None and not _is_real(cfg.min_rating):
        problems.append(("min_rating", f"must be a real or null, got {cfg.min_rating!r}"))

    for name in ("annotation_on", "exploration_on", "reflection_on"):
        if not isinstance(getattr(cfg.ablation, name), bool):
            problems.append((f"ablation.{name}", "must be a boolean"))
    if not isinstance(cfg.exclude_history, bool):
        problems.append(("exclude_history", "must be a boolean"))

    if problems:
        raise ConfigError(problems)
    if cfg.ablation.reflection_on and cfg.max_reflections == 0:
        log.warning("reflection_on is set but max_reflections = 0; running a single pass")
    return cfg


def load_config(path: str | Path | None = None) -> PipelineConfig:
    """Read and validate a TOML config file; ``None`` gives the defaults."""
    if path is None:
        return validate_config(PipelineConfig())
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return validate_config(PipelineConfig.from_dict(data))

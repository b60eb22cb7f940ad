"""Experiment setup: parameter sampling specs and the N x R job matrix.

Everything here is a pure function of the experiment configuration, including
its base seed, so a configuration exported on one machine reproduces the
identical job matrix anywhere else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from .recipe import (
    IngredientOrder,
    MalformedDocument,
    PointSelection,
    Recipe,
    SchemaViolation,
    ValidationError,
    recipe_from_dict,
    recipe_to_dict,
    validate_recipe,
)

EXPERIMENT_FORMAT_VERSION = 1
DEFAULT_COMBO_CAP = 100_000

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """SplitMix64 avalanche step; the project's documented 64-bit mixer."""
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(base_seed: int, *indices: int) -> int:
    """Seed for a job, stable under adding more runs or seeds later."""
    h = splitmix64(base_seed)
    for ix in indices:
        h = splitmix64((h ^ (ix & _MASK64)) & _MASK64)
    return h


class ComboExplosion(ValueError):
    """The even-sampling lattice exceeds the configured size cap."""


class SpecKind(str, Enum):
    NUMERIC = "numeric"
    INTEGER = "integer"
    CATEGORICAL = "categorical"


class SampleMethod(str, Enum):
    EVEN = "even"
    UNIFORM_RANDOM = "uniform_random"


# Recipe fields a ParameterSpec target may resolve to.
_GLOBAL_FIELDS = {"grid_spacing", "point_selection", "ingredient_order"}
_INGREDIENT_FIELDS = {
    "radius",
    "count",
    "nb_jitter",
    "jitter_max",
    "rejection_threshold",
    "weight",
    "binding_distance",
}


@dataclass(frozen=True)
class ParameterSpec:
    """How one recipe parameter is sampled across the experiment."""

    target: str  # "global.<field>" or "ingredient.<name or *>.<field>"
    kind: SpecKind
    domain: tuple[float, float] | tuple[Any, ...]  # interval or explicit value set
    method: SampleMethod
    k_steps: int = 0  # only for even sampling of intervals

    def interval(self) -> tuple[float, float]:
        lo, hi = self.domain  # type: ignore[misc]
        return float(lo), float(hi)


@dataclass(frozen=True)
class ExperimentConfig:
    recipe: Recipe
    specs: tuple[ParameterSpec, ...]
    n_configs: int
    r_seeds: int
    base_seed: int
    output_location: str = ""
    density_dims: tuple[int, int, int] = (16, 16, 16)


@dataclass(frozen=True)
class RunConfig:
    run_index: int
    assignment: dict[str, Any]
    seeds: tuple[int, ...]


def validate_spec(spec: ParameterSpec, recipe: Recipe) -> list[str]:
    out = []
    parts = spec.target.split(".")
    if parts[0] == "global":
        if len(parts) != 2 or parts[1] not in _GLOBAL_FIELDS:
            out.append(f"spec {spec.target}: unknown global field")
    elif parts[0] == "ingredient":
        if len(parts) != 3 or parts[2] not in _INGREDIENT_FIELDS:
            out.append(f"spec {spec.target}: malformed ingredient target")
        elif parts[1] != "*" and all(i.name != parts[1] for i in recipe.ingredients):
            out.append(f"spec {spec.target}: no ingredient named '{parts[1]}'")
    else:
        out.append(f"spec {spec.target}: target must start with 'global.' or 'ingredient.'")

    if spec.kind is SpecKind.CATEGORICAL:
        if not spec.domain:
            out.append(f"spec {spec.target}: empty categorical value set")
    else:
        if len(spec.domain) != 2:
            out.append(f"spec {spec.target}: interval domain must be [lo, hi]")
        else:
            lo, hi = spec.interval()
            if lo > hi:
                out.append(f"spec {spec.target}: lo must be <= hi")
    if spec.method is SampleMethod.EVEN and spec.kind is not SpecKind.CATEGORICAL:
        if spec.k_steps < 2:
            out.append(f"spec {spec.target}: even sampling requires k_steps >= 2")
    return out


def validate_config(cfg: ExperimentConfig) -> list[str]:
    out = validate_recipe(cfg.recipe)
    for spec in cfg.specs:
        out.extend(validate_spec(spec, cfg.recipe))
    targets = [s.target for s in cfg.specs]
    if len(targets) != len(set(targets)):
        out.append("specs: duplicate targets")
    if cfg.n_configs < 1:
        out.append("n_configs must be >= 1")
    if cfg.r_seeds < 1:
        out.append("r_seeds must be >= 1")
    if cfg.base_seed < 0 or cfg.base_seed >= 2**64:
        out.append("base_seed must fit in an unsigned 64-bit integer")
    if any(d < 1 for d in cfg.density_dims):
        out.append("density_dims must be >= 1 per axis")
    return out


def _spec_values_even(spec: ParameterSpec) -> list[Any]:
    if spec.kind is SpecKind.CATEGORICAL:
        return list(spec.domain)
    lo, hi = spec.interval()
    k = spec.k_steps
    vals = [lo + i * (hi - lo) / (k - 1) for i in range(k)]
    if spec.kind is SpecKind.INTEGER:
        ints = []
        for v in vals:
            iv = int(round(v))
            if iv not in ints:
                ints.append(iv)
        return ints
    return vals


def expand_even(specs: Sequence[ParameterSpec], cap: int = DEFAULT_COMBO_CAP) -> list[dict]:
    """Full Cartesian lattice over even-sampled specs, first spec slowest-varying."""
    per_spec = [(s.target, _spec_values_even(s)) for s in specs]
    total = 1
    for _, vals in per_spec:
        total *= len(vals)
    if total > cap:
        raise ComboExplosion(f"even-sampling lattice has {total} points, cap is {cap}")
    assignments: list[dict] = [{}]
    for target, vals in per_spec:
        assignments = [{**a, target: v} for a in assignments for v in vals]
    return assignments


def sample_uniform(
    specs: Sequence[ParameterSpec], n: int, rng_seed: int
) -> list[dict]:
    """n independent uniform draws per spec; deterministic in rng_seed."""
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    out = []
    for _ in range(n):
        a = {}
        for spec in specs:
            a[spec.target] = _draw_uniform(spec, rng)
        out.append(a)
    return out


def _draw_uniform(spec: ParameterSpec, rng: np.random.Generator) -> Any:
    if spec.kind is SpecKind.CATEGORICAL:
        return spec.domain[int(rng.integers(0, len(spec.domain)))]
    lo, hi = spec.interval()
    if spec.kind is SpecKind.INTEGER:
        return int(rng.integers(int(lo), int(hi) + 1))
    return float(rng.uniform(lo, hi))


def build_job_matrix(cfg: ExperimentConfig, cap: int = DEFAULT_COMBO_CAP) -> list[RunConfig]:
    """The experiment's N run configurations, each carrying R derived seeds.

    Even specs form a Cartesian lattice; uniform specs are drawn once per
    lattice point.  When the lattice is larger than N a deterministically
    shuffled prefix (seeded by base_seed) is taken so cost stays bounded.
    """
    problems = validate_config(cfg)
    if problems:
        raise ValidationError(problems)
    even = [s for s in cfg.specs if s.method is SampleMethod.EVEN]
    uniform = [s for s in cfg.specs if s.method is SampleMethod.UNIFORM_RANDOM]

    n = cfg.n_configs
    if even:
        lattice = expand_even(even, cap=cap)
        if len(lattice) < n:
            raise ValidationError(
                [f"n_configs = {n} exceeds the even-sampling lattice size {len(lattice)}"]
            )
        if len(lattice) > n:
            perm_rng = np.random.Generator(
                np.random.PCG64(derive_seed(cfg.base_seed, 0xA11CE))
            )
            order = perm_rng.permutation(len(lattice))[:n]
            lattice = [lattice[i] for i in sorted(int(i) for i in order)]
        base = lattice
    else:
        base = [{} for _ in range(n)]

    if uniform:
        drawn = sample_uniform(uniform, n, derive_seed(cfg.base_seed, 0x5EED))
        base = [{**a, **d} for a, d in zip(base, drawn)]

    runs = []
    for i, assignment in enumerate(base):
        seeds = tuple(derive_seed(cfg.base_seed, i, j) for j in range(cfg.r_seeds))
        runs.append(RunConfig(run_index=i, assignment=assignment, seeds=seeds))
    return runs


# --- experiment document (round-trippable wire format) ---


def _spec_to_dict(spec: ParameterSpec) -> dict:
    d: dict[str, Any] = {
        "target": spec.target,
        "kind": spec.kind.value,
        "method": spec.method.value,
    }
    if spec.kind is SpecKind.CATEGORICAL:
        d["values"] = list(spec.domain)
    else:
        lo, hi = spec.interval()
        d["domain"] = [lo, hi]
        if spec.method is SampleMethod.EVEN:
            d["k_steps"] = spec.k_steps
    return d


def _spec_from_dict(d: dict) -> ParameterSpec:
    try:
        kind = SpecKind(d["kind"])
        method = SampleMethod(d["method"])
        if kind is SpecKind.CATEGORICAL:
            domain: tuple = tuple(d["values"])
        else:
            lo, hi = d["domain"]
            domain = (float(lo), float(hi))
        return ParameterSpec(
            target=d["target"],
            kind=kind,
            domain=domain,
            method=method,
            k_steps=int(d.get("k_steps", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"bad parameter spec: {exc}") from exc


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "format_version": EXPERIMENT_FORMAT_VERSION,
        "recipe": recipe_to_dict(cfg.recipe),
        "specs": [_spec_to_dict(s) for s in cfg.specs],
        "n_configs": cfg.n_configs,
        "r_seeds": cfg.r_seeds,
        "base_seed": cfg.base_seed,
        "output_location": cfg.output_location,
        "density_dims": list(cfg.density_dims),
    }


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise SchemaViolation("experiment document must be a JSON object")
    version = doc.get("format_version")
    if version != EXPERIMENT_FORMAT_VERSION:
        raise SchemaViolation(f"unsupported format_version: {version!r}")
    allowed = {
        "format_version",
        "recipe",
        "specs",
        "n_configs",
        "r_seeds",
        "base_seed",
        "output_location",
        "density_dims",
    }
    unknown = set(doc) - allowed
    if unknown:
        raise SchemaViolation(f"experiment: unknown key(s) {sorted(unknown)}")
    try:
        recipe = recipe_from_dict(doc["recipe"])
        specs = tuple(_spec_from_dict(s) for s in doc.get("specs", []))
        dims = doc.get("density_dims", [16, 16, 16])
        return ExperimentConfig(
            recipe=recipe,
            specs=specs,
            n_configs=int(doc["n_configs"]),
            r_seeds=int(doc["r_seeds"]),
            base_seed=int(doc["base_seed"]),
            output_location=str(doc.get("output_location", "")),
            density_dims=(int(dims[0]), int(dims[1]), int(dims[2])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaViolation):
            raise
        raise SchemaViolation(f"bad experiment document: {exc}") from exc


def export_experiment(cfg: ExperimentConfig) -> str:
    """Self-contained document; re-importing reproduces the identical job matrix."""
    problems = validate_config(cfg)
    if problems:
        raise ValidationError(problems)
    return json.dumps(config_to_dict(cfg), sort_keys=True, indent=2) + "\n"


def import_experiment(text: str) -> ExperimentConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from exc
    cfg = config_from_dict(doc)
    problems = validate_config(cfg)
    if problems:
        raise ValidationError(problems)
    return cfg

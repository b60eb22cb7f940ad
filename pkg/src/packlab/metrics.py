"""Derived statistical metrics per packing output and per-run summaries.

The run (R seeded outputs of one parameter assignment) is the atomic unit of
filtering; summaries carry the seed-averaged metrics next to the run's
parameter assignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .engine import PackingOutput, min_image_distance
from .recipe import PackingVolume, VolumeMode
from .sampler import RunConfig


class MismatchedRun(ValueError):
    """Outputs passed to summarize_run span different run indices."""


@dataclass(frozen=True)
class OutputMetrics:
    space_occupancy: dict[str, float]
    usage: dict[str, float]
    distance_matrix: dict[str, dict[str, Optional[float]]]
    runtime_seconds: float


@dataclass(frozen=True)
class RunSummary:
    run_index: int
    assignment: dict[str, Any]
    seeds: tuple[int, ...]
    space_occupancy: dict[str, float]
    usage: dict[str, float]
    distance_matrix: dict[str, dict[str, Optional[float]]]
    runtime_seconds: float
    per_seed: tuple[OutputMetrics, ...]


def space_occupancy(out: PackingOutput, volume: PackingVolume) -> dict[str, float]:
    """Fraction of the packing volume (or area) covered per ingredient type.

    Containment (or periodic wrapping) guarantees each instance's full measure
    lies inside the volume, so no boundary clipping is needed.  On a sphere
    surface the covered patch of an instance with contact-chord radius r is a
    spherical cap of area exactly pi*r^2.
    """
    total = volume.measure()
    occ = {name: 0.0 for name in out.requested_counts}
    for inst in out.instances:
        if volume.mode is VolumeMode.BOX3D:
            measure = 4.0 / 3.0 * math.pi * inst.radius**3
        else:
            measure = math.pi * inst.radius**2
        occ[inst.ingredient] = occ.get(inst.ingredient, 0.0) + measure / total
    return occ


def usage(out: PackingOutput) -> dict[str, float]:
    """placed / requested per ingredient; a zero request is vacuously satisfied."""
    res = {}
    for name, requested in out.requested_counts.items():
        placed = out.placed_counts.get(name, 0)
        res[name] = 1.0 if requested == 0 else placed / requested
    return res


def distance_matrix(
    out: PackingOutput, volume: PackingVolume
) -> dict[str, dict[str, Optional[float]]]:
    """Mean pairwise distance between instances of each ingredient type pair.

    Ordered-pair mean with fixed (instance index) summation order for
    bit-reproducibility; minimum-image distances in periodic volumes.  An
    entry is None when a type has no instances, or on the diagonal with a
    single instance.
    """
    names = sorted(out.requested_counts)
    groups: dict[str, list[np.ndarray]] = {n: [] for n in names}
    for inst in out.instances:
        groups[inst.ingredient].append(np.array(inst.position))
    mat: dict[str, dict[str, Optional[float]]] = {a: {} for a in names}
    for a in names:
        for b in names:
            total = 0.0
            count = 0
            for i, p in enumerate(groups[a]):
                for j, q in enumerate(groups[b]):
                    if a == b and i == j:
                        continue
                    total += min_image_distance(p, q, volume)
                    count += 1
            mat[a][b] = total / count if count else None
    return mat


def compute_metrics(out: PackingOutput, volume: PackingVolume) -> OutputMetrics:
    return OutputMetrics(
        space_occupancy=space_occupancy(out, volume),
        usage=usage(out),
        distance_matrix=distance_matrix(out, volume),
        runtime_seconds=out.runtime_seconds,
    )


def _mean_maps(maps: list[dict[str, float]]) -> dict[str, float]:
    keys = maps[0].keys()
    return {k: sum(m[k] for m in maps) / len(maps) for k in keys}


def summarize_run(
    per_seed: list[OutputMetrics], run_cfg: RunConfig, run_indices: Optional[list[int]] = None
) -> RunSummary:
    """Arithmetic mean of each metric over a run's seeds.

    A distance entry missing for some seeds is excluded from that entry's
    mean; it is missing in the summary only if missing for every seed.
    """
    if run_indices is not None and any(ix != run_cfg.run_index for ix in run_indices):
        raise MismatchedRun(f"outputs span run indices {sorted(set(run_indices))}")
    if not per_seed:
        raise MismatchedRun("no outputs to summarize")

    names = sorted(per_seed[0].usage)
    dist: dict[str, dict[str, Optional[float]]] = {a: {} for a in names}
    for a in names:
        for b in names:
            vals = [
                m.distance_matrix[a][b]
                for m in per_seed
                if m.distance_matrix[a][b] is not None
            ]
            dist[a][b] = sum(vals) / len(vals) if vals else None

    return RunSummary(
        run_index=run_cfg.run_index,
        assignment=dict(run_cfg.assignment),
        seeds=tuple(run_cfg.seeds),
        space_occupancy=_mean_maps([m.space_occupancy for m in per_seed]),
        usage=_mean_maps([m.usage for m in per_seed]),
        distance_matrix=dist,
        runtime_seconds=sum(m.runtime_seconds for m in per_seed) / len(per_seed),
        per_seed=tuple(per_seed),
    )


def summary_record(s: RunSummary) -> dict:
    """Flat one-line record for runs.jsonl: assignment values plus all summary metrics."""
    rec: dict[str, Any] = {"run_index": s.run_index, "seeds": list(s.seeds)}
    for path, value in sorted(s.assignment.items()):
        rec[f"param.{path}"] = value
    for name in sorted(s.usage):
        rec[f"usage.{name}"] = s.usage[name]
        rec[f"space_occupancy.{name}"] = s.space_occupancy[name]
    rec["runtime_seconds"] = s.runtime_seconds
    for a in sorted(s.distance_matrix):
        for b in sorted(s.distance_matrix[a]):
            if a <= b:
                rec[f"distance_avg.{a}.{b}"] = s.distance_matrix[a][b]
    return rec

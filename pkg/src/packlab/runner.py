"""Executes an experiment's N x R job matrix on a worker pool.

Jobs are pure functions of (recipe, assignment, seed), so results are
independent of scheduling order; all files are written from the coordinating
process and runs.jsonl is reduced in run-index order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional

from . import density as density_mod
from .engine import PackingOutput, pack
from .metrics import compute_metrics, summarize_run, summary_record
from .recipe import Recipe, VolumeMode, recipe_from_dict, recipe_to_dict
from .sampler import ExperimentConfig, RunConfig, build_job_matrix
from .store import Store


def _run_job(args) -> tuple[int, int, dict]:
    """Worker entry point; returns the output as a plain dict for pickling."""
    from .store import output_to_dict

    recipe_doc, assignment, seed, run_index, seed_index = args
    recipe = recipe_from_dict(recipe_doc)
    out = pack(recipe, assignment, seed=seed, run_index=run_index)
    return run_index, seed_index, output_to_dict(out)


def run_experiment(
    store: Store,
    exp_id: str,
    jobs: Optional[int] = None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> list[dict]:
    """Execute all missing outputs, then (re)generate metrics and densities.

    Completed jobs are skipped, so a partially run experiment resumes; a
    re-run of a completed job must reproduce identical bytes (the store
    raises otherwise).  Returns the runs.jsonl records.
    """
    from .store import output_from_dict

    cfg = store.load_experiment(exp_id)
    store.clear_failed(exp_id)
    matrix = build_job_matrix(cfg)
    recipe_doc = recipe_to_dict(cfg.recipe)

    pending = []
    for run in matrix:
        for j, seed in enumerate(run.seeds):
            if not store.output_path(exp_id, run.run_index, j).exists():
                pending.append((recipe_doc, run.assignment, seed, run.run_index, j))

    total = len(matrix) * cfg.r_seeds
    completed = total - len(pending)
    if progress:
        progress(completed, total)

    jobs = jobs or os.cpu_count() or 1
    if pending:
        if jobs == 1:
            results = map(_run_job, pending)
            for run_index, seed_index, out_doc in results:
                store.save_output(exp_id, run_index, seed_index, output_from_dict(out_doc))
                completed += 1
                if progress:
                    progress(completed, total)
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for run_index, seed_index, out_doc in pool.map(
                    _run_job, pending, chunksize=1
                ):
                    store.save_output(exp_id, run_index, seed_index, output_from_dict(out_doc))
                    completed += 1
                    if progress:
                        progress(completed, total)

    return generate_derived(store, exp_id, matrix=matrix)


def generate_derived(
    store: Store, exp_id: str, matrix: Optional[list[RunConfig]] = None
) -> list[dict]:
    """Regenerate runs.jsonl and the per-run probabilistic volumes from raw outputs."""
    cfg = store.load_experiment(exp_id)
    if matrix is None:
        matrix = build_job_matrix(cfg)
    volume = cfg.recipe.volume

    records = []
    for run in matrix:
        outputs = [
            store.load_output(exp_id, run.run_index, j) for j in range(cfg.r_seeds)
        ]
        per_seed = [compute_metrics(out, volume) for out in outputs]
        summary = summarize_run(per_seed, run)
        records.append(summary_record(summary))
        _write_density(store, exp_id, run.run_index, outputs, cfg)
    store.save_metrics_table(exp_id, records)
    return records


def _write_density(
    store: Store, exp_id: str, run_index: int, outputs: list[PackingOutput], cfg: ExperimentConfig
) -> None:
    volume = cfg.recipe.volume
    if volume.mode is VolumeMode.SPHERE_SURFACE:
        return  # box-oriented heatmaps do not apply; surface maps are served on demand
    vols = [density_mod.voxelize(out, volume, cfg.density_dims) for out in outputs]
    avg = density_mod.average_volumes(vols)
    header, payload = density_mod.write_volume(avg)
    axes = ["x", "y", "z"]  # for plane2d the z projection is the plane map itself
    projections = {}
    sidecars = {}
    for axis in axes:
        img = density_mod.project(avg, axis)
        projections[axis] = density_mod.write_pgm(img)
        sidecars[axis] = density_mod.projection_sidecar(img)
    store.save_density(exp_id, run_index, header, payload, projections, sidecars)

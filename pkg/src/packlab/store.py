"""On-disk experiment layout: shareable, resumable, diff-friendly.

Layout under the data root:

    experiments/<id>/experiment.json
    experiments/<id>/recipe.json
    experiments/<id>/runs/run_<n>/output_<r>.json
    experiments/<id>/runs.jsonl
    experiments/<id>/density/run_<n>/{volume.json, volume.bin, proj_x.pgm, ...}

All JSON is serialized with sorted keys and shortest round-trip floats, so a
re-run of a deterministic job must produce byte-identical files; a mismatch
is surfaced loudly as a ConflictError.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .engine import PackingOutput, PlacedInstance
from .sampler import (
    ExperimentConfig,
    config_to_dict,
    export_experiment,
    import_experiment,
)
from .recipe import serialize_recipe


class IoError(OSError):
    """Storage failure."""


class ConflictError(RuntimeError):
    """A job file already exists with different content (determinism violation)."""


@dataclass(frozen=True)
class ExperimentRecord:
    id: str
    config: ExperimentConfig
    status: str  # created | running | done | failed
    progress: float  # completed jobs / total jobs


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def experiment_id(cfg: ExperimentConfig) -> str:
    """Content hash of the exported document, 16 hex chars; stable under re-export."""
    doc = export_experiment(cfg)
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def output_to_dict(out: PackingOutput) -> dict:
    run_index, assignment = out.config_ref
    return {
        "seed": out.seed,
        "runtime_seconds": out.runtime_seconds,
        "config_ref": {"run_index": run_index, "assignment": assignment},
        "instances": [
            {"ingredient": i.ingredient, "position": list(i.position), "radius": i.radius}
            for i in out.instances
        ],
        "placed_counts": out.placed_counts,
        "requested_counts": out.requested_counts,
    }


def output_from_dict(doc: dict) -> PackingOutput:
    ref = doc["config_ref"]
    return PackingOutput(
        instances=tuple(
            PlacedInstance(
                ingredient=i["ingredient"],
                position=tuple(i["position"]),
                radius=i["radius"],
            )
            for i in doc["instances"]
        ),
        seed=doc["seed"],
        runtime_seconds=doc["runtime_seconds"],
        placed_counts=dict(doc["placed_counts"]),
        requested_counts=dict(doc["requested_counts"]),
        config_ref=(ref["run_index"], dict(ref["assignment"])),
    )


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise IoError(str(exc)) from exc


class Store:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def experiments_dir(self) -> Path:
        return self.root / "experiments"

    def experiment_dir(self, exp_id: str) -> Path:
        return self.experiments_dir() / exp_id

    def output_path(self, exp_id: str, run_index: int, seed_index: int) -> Path:
        return self.experiment_dir(exp_id) / "runs" / f"run_{run_index}" / f"output_{seed_index}.json"

    # --- experiments ---

    def save_experiment(self, cfg: ExperimentConfig) -> ExperimentRecord:
        """Idempotent: the same config hashes to the same id and directory."""
        exp_id = experiment_id(cfg)
        exp_dir = self.experiment_dir(exp_id)
        doc = export_experiment(cfg).encode()
        existing = exp_dir / "experiment.json"
        if existing.exists():
            if existing.read_bytes() != doc:
                raise ConflictError(f"experiment {exp_id} exists with different content")
        else:
            _atomic_write(existing, doc)
            _atomic_write(exp_dir / "recipe.json", serialize_recipe(cfg.recipe).encode())
        return self.record(exp_id)

    def load_experiment(self, exp_id: str) -> ExperimentConfig:
        path = self.experiment_dir(exp_id) / "experiment.json"
        if not path.exists():
            raise KeyError(exp_id)
        return import_experiment(path.read_text())

    def list_experiments(self) -> list[ExperimentRecord]:
        base = self.experiments_dir()
        if not base.is_dir():
            return []
        out = []
        for entry in sorted(base.iterdir()):
            if (entry / "experiment.json").exists():
                out.append(self.record(entry.name))
        return out

    def record(self, exp_id: str) -> ExperimentRecord:
        cfg = self.load_experiment(exp_id)
        total = cfg.n_configs * cfg.r_seeds
        done = sum(
            1
            for i in range(cfg.n_configs)
            for j in range(cfg.r_seeds)
            if self.output_path(exp_id, i, j).exists()
        )
        if (self.experiment_dir(exp_id) / "FAILED").exists():
            status = "failed"
        elif done == total and (self.experiment_dir(exp_id) / "runs.jsonl").exists():
            status = "done"
        elif done == 0:
            status = "created"
        else:
            status = "running"
        return ExperimentRecord(
            id=exp_id, config=cfg, status=status, progress=done / total if total else 0.0
        )

    def mark_failed(self, exp_id: str, message: str) -> None:
        _atomic_write(self.experiment_dir(exp_id) / "FAILED", message.encode())

    def clear_failed(self, exp_id: str) -> None:
        marker = self.experiment_dir(exp_id) / "FAILED"
        if marker.exists():
            marker.unlink()

    # --- outputs ---

    def save_output(self, exp_id: str, run_index: int, seed_index: int, out: PackingOutput) -> None:
        if not (self.experiment_dir(exp_id) / "experiment.json").exists():
            raise KeyError(exp_id)
        data = canonical_json(output_to_dict(out)).encode()
        path = self.output_path(exp_id, run_index, seed_index)
        if path.exists():
            if path.read_bytes() != data:
                raise ConflictError(
                    f"{path} exists with different content; the engine is expected to be deterministic"
                )
            return
        _atomic_write(path, data)

    def load_output(self, exp_id: str, run_index: int, seed_index: int) -> PackingOutput:
        path = self.output_path(exp_id, run_index, seed_index)
        if not path.exists():
            raise KeyError(f"{exp_id}: run {run_index}, seed {seed_index}")
        return output_from_dict(json.loads(path.read_text()))

    # --- derived artifacts ---

    def save_metrics_table(self, exp_id: str, records: list[dict]) -> None:
        lines = [json.dumps(r, sort_keys=True) for r in records]
        _atomic_write(
            self.experiment_dir(exp_id) / "runs.jsonl", ("\n".join(lines) + "\n").encode()
        )

    def load_metrics_table(self, exp_id: str) -> list[dict]:
        path = self.experiment_dir(exp_id) / "runs.jsonl"
        if not path.exists():
            raise KeyError(f"{exp_id}: metrics table not generated yet")
        return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]

    def density_dir(self, exp_id: str, run_index: int) -> Path:
        return self.experiment_dir(exp_id) / "density" / f"run_{run_index}"

    def save_density(self, exp_id: str, run_index: int, header: dict, payload: bytes,
                     projections: dict[str, bytes], sidecars: dict[str, dict]) -> None:
        base = self.density_dir(exp_id, run_index)
        _atomic_write(base / "volume.json", canonical_json(header).encode())
        _atomic_write(base / "volume.bin", payload)
        for axis, pgm in projections.items():
            _atomic_write(base / f"proj_{axis}.pgm", pgm)
            _atomic_write(base / f"proj_{axis}.json", canonical_json(sidecars[axis]).encode())

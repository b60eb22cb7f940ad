"""HTTP facade over the store, runner and filter engine.

Setup, execution and analysis as a small JSON API: experiments are created
from self-contained documents, executed asynchronously on a worker pool, and
analyzed through stateless filter/histogram queries (filter state is
client-owned and travels with each request).
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import xfilter
from .density import project, surface_density_map, voxelize, write_pgm
from .recipe import RecipeError, ValidationError, parse_recipe, serialize_recipe
from .runner import run_experiment
from .sampler import build_job_matrix, config_from_dict, import_experiment
from .store import ConflictError, Store
from .xfilter import RowGroup, Table


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


class RecipeUpload(BaseModel):
    document: dict


class ExperimentCreated(BaseModel):
    id: str
    status: str
    total_jobs: int


class StatusResponse(BaseModel):
    id: str
    status: str
    progress: float
    total_jobs: int


class DimensionInfo(BaseModel):
    name: str
    kind: str
    min: Optional[float] = None
    max: Optional[float] = None
    categories: Optional[list[str]] = None


class HistogramResponse(BaseModel):
    dimension: str
    edges: Optional[list[float]] = None
    categories: Optional[list[Any]] = None
    full_counts: list[int]
    filtered_counts: list[int]
    total_runs: int
    matching_runs: int


class MatchingRun(BaseModel):
    run_index: int
    seeds: list[int]


class RunsResponse(BaseModel):
    runs: list[MatchingRun]
    total_runs: int


class OutputDetail(BaseModel):
    run_index: int
    seed_index: int
    seed: int
    assignment: dict[str, Any]
    instances: list[dict]
    placed_counts: dict[str, int]
    requested_counts: dict[str, int]
    runtime_seconds: float


def _decode_filters(raw: Optional[str]) -> RowGroup:
    if not raw:
        return RowGroup()
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ApiError(400, "bad_filters", f"filters is not valid JSON: {exc}")
    if not isinstance(obj, dict):
        raise ApiError(400, "bad_filters", "filters must be a JSON object")
    filters: dict[str, Any] = {}
    for name, pred in obj.items():
        if isinstance(pred, dict) and "values" in pred:
            filters[name] = set(pred["values"])
        elif isinstance(pred, list) and len(pred) == 2:
            filters[name] = (float(pred[0]), float(pred[1]))
        else:
            raise ApiError(
                400, "bad_filters", f"filter '{name}' must be [lo, hi] or {{\"values\": [...]}}"
            )
    return RowGroup(filters=filters)


class ServiceState:
    """Shared state behind the request handlers; tables cached per experiment."""

    def __init__(self, store: Store, jobs: Optional[int] = None):
        self.store = store
        self.jobs = jobs
        self.running: set[str] = set()
        self.lock = threading.Lock()
        self._tables: dict[str, Table] = {}

    def table(self, exp_id: str) -> Table:
        with self.lock:
            cached = self._tables.get(exp_id)
        if cached is not None:
            return cached
        try:
            records = self.store.load_metrics_table(exp_id)
        except KeyError as exc:
            raise ApiError(404, "not_ready", str(exc))
        table = xfilter.load_table(records)
        with self.lock:
            self._tables[exp_id] = table
        return table

    def launch(self, exp_id: str) -> None:
        with self.lock:
            if exp_id in self.running:
                raise ApiError(409, "already_running", f"experiment {exp_id} is already running")
            self.running.add(exp_id)

        def work():
            try:
                run_experiment(self.store, exp_id, jobs=self.jobs)
            except Exception as exc:  # surfaced via status = failed
                self.store.mark_failed(exp_id, str(exc))
            finally:
                with self.lock:
                    self.running.discard(exp_id)
                    self._tables.pop(exp_id, None)

        threading.Thread(target=work, daemon=True).start()


def create_app(data_dir: str | Path, jobs: Optional[int] = None,
               static_dir: Optional[str | Path] = None) -> FastAPI:
    store = Store(data_dir)
    state = ServiceState(store, jobs=jobs)
    app = FastAPI(title="packlab")
    app.state.service = state

    @app.exception_handler(ApiError)
    async def api_error_handler(_req: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"error": {"code": exc.code, "message": exc.message}}
        )

    @app.exception_handler(RecipeError)
    async def recipe_error_handler(_req: Request, exc: RecipeError):
        return JSONResponse(
            status_code=400, content={"error": {"code": "validation", "message": str(exc)}}
        )

    @app.exception_handler(xfilter.UnknownDimension)
    async def dim_error_handler(_req: Request, exc: xfilter.UnknownDimension):
        return JSONResponse(
            status_code=400,
            content={"error": {"code": "unknown_dimension", "message": str(exc)}},
        )

    def get_record(exp_id: str):
        try:
            return store.record(exp_id)
        except KeyError:
            raise ApiError(404, "unknown_experiment", f"no experiment {exp_id}")

    # --- recipes ---

    @app.get("/api/recipes")
    def list_recipes() -> list[dict]:
        base = store.root / "recipes"
        if not base.is_dir():
            return []
        return [
            json.loads(p.read_text()) for p in sorted(base.glob("*.json"))
        ]

    @app.post("/api/recipes", status_code=201)
    def upload_recipe(body: RecipeUpload) -> dict:
        text = json.dumps(body.document)
        recipe = parse_recipe(text)  # raises RecipeError -> 400
        path = store.root / "recipes" / f"{recipe.name}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(serialize_recipe(recipe))
        return {"name": recipe.name}

    # --- experiments ---

    @app.get("/api/experiments")
    def list_experiments() -> list[StatusResponse]:
        return [
            StatusResponse(
                id=r.id,
                status=r.status,
                progress=r.progress,
                total_jobs=r.config.n_configs * r.config.r_seeds,
            )
            for r in store.list_experiments()
        ]

    @app.post("/api/experiments", status_code=201)
    def create_experiment(document: dict) -> ExperimentCreated:
        cfg = config_from_dict(document)
        build_job_matrix(cfg)  # validates, incl. lattice size vs n_configs
        record = store.save_experiment(cfg)
        return ExperimentCreated(
            id=record.id,
            status=record.status,
            total_jobs=cfg.n_configs * cfg.r_seeds,
        )

    @app.post("/api/experiments/{exp_id}/run", status_code=202)
    def run(exp_id: str) -> StatusResponse:
        record = get_record(exp_id)
        state.launch(exp_id)
        return StatusResponse(
            id=exp_id,
            status="running",
            progress=record.progress,
            total_jobs=record.config.n_configs * record.config.r_seeds,
        )

    @app.get("/api/experiments/{exp_id}/status")
    def status(exp_id: str) -> StatusResponse:
        record = get_record(exp_id)
        st = record.status
        if exp_id in state.running and st != "done":
            st = "running"
        return StatusResponse(
            id=exp_id,
            status=st,
            progress=record.progress,
            total_jobs=record.config.n_configs * record.config.r_seeds,
        )

    @app.get("/api/experiments/{exp_id}/document")
    def document(exp_id: str) -> dict:
        get_record(exp_id)
        return json.loads(
            (store.experiment_dir(exp_id) / "experiment.json").read_text()
        )

    # --- analysis ---

    @app.get("/api/experiments/{exp_id}/dimensions")
    def dimensions(exp_id: str) -> list[DimensionInfo]:
        get_record(exp_id)
        table = state.table(exp_id)
        out = []
        for dim in table.dimensions:
            col = table.column(dim.name)
            if dim.kind == "categorical":
                out.append(
                    DimensionInfo(
                        name=dim.name,
                        kind=dim.kind,
                        categories=sorted({str(v) for v in col.tolist()}),
                    )
                )
            else:
                import numpy as np

                finite = col[np.isfinite(col)]
                out.append(
                    DimensionInfo(
                        name=dim.name,
                        kind=dim.kind,
                        min=float(finite.min()) if finite.size else None,
                        max=float(finite.max()) if finite.size else None,
                    )
                )
        return out

    @app.get("/api/experiments/{exp_id}/histogram")
    def histogram(
        exp_id: str,
        dim: str,
        bins: int = Query(default=xfilter.DEFAULT_BIN_COUNT, ge=1),
        filters: Optional[str] = None,
    ) -> HistogramResponse:
        get_record(exp_id)
        table = state.table(exp_id)
        row = _decode_filters(filters)
        hist = xfilter.histogram(table, row, dim, bins)
        matching = xfilter.apply_filters(table, row)
        return HistogramResponse(
            dimension=dim,
            edges=None if hist.edges is None else [float(e) for e in hist.edges],
            categories=None if hist.categories is None else list(hist.categories),
            full_counts=[int(c) for c in hist.full_counts],
            filtered_counts=[int(c) for c in hist.filtered_counts],
            total_runs=len(table),
            matching_runs=len(matching),
        )

    @app.get("/api/experiments/{exp_id}/runs")
    def matching_runs(exp_id: str, filters: Optional[str] = None) -> RunsResponse:
        get_record(exp_id)
        table = state.table(exp_id)
        row = _decode_filters(filters)
        matches = xfilter.list_matching_runs(table, row)
        return RunsResponse(
            runs=[MatchingRun(run_index=i, seeds=[int(s) for s in seeds]) for i, seeds in matches],
            total_runs=len(table),
        )

    @app.get("/api/experiments/{exp_id}/runs/{run_index}/heatmap")
    def heatmap(
        exp_id: str,
        run_index: int,
        axis: str = "z",
        mode: str = "combined",
    ) -> Response:
        record = get_record(exp_id)
        cfg = record.config
        if axis not in ("x", "y", "z"):
            raise ApiError(400, "bad_axis", "axis must be x, y or z")
        if run_index < 0 or run_index >= cfg.n_configs:
            raise ApiError(404, "unknown_run", f"run {run_index} out of range")
        from .recipe import VolumeMode

        volume = cfg.recipe.volume
        try:
            outputs = [
                store.load_output(exp_id, run_index, j) for j in range(cfg.r_seeds)
            ]
        except KeyError as exc:
            raise ApiError(404, "not_ready", str(exc))
        if volume.mode is VolumeMode.SPHERE_SURFACE:
            import numpy as np

            maps = [surface_density_map(out, volume) for out in outputs]
            raw = np.mean(maps, axis=0)
            peak = float(raw.max())
            pixels = raw / peak if peak > 0 else raw
            gray = np.clip(np.rint(pixels * 255.0), 0, 255).astype(np.uint8)
            body = f"P5\n{gray.shape[1]} {gray.shape[0]}\n255\n".encode() + gray.tobytes()
            return Response(content=body, media_type="image/x-portable-graymap")
        from .density import average_volumes

        channel = None if mode == "combined" else mode
        vols = [voxelize(out, volume, cfg.density_dims) for out in outputs]
        avg = average_volumes(vols)
        if channel is not None and channel not in avg.channels:
            raise ApiError(404, "unknown_ingredient", f"no ingredient channel '{channel}'")
        img = project(avg, axis, channel=channel)
        return Response(content=write_pgm(img), media_type="image/x-portable-graymap")

    @app.get("/api/experiments/{exp_id}/runs/{run_index}/outputs/{seed_index}")
    def output_detail(
        exp_id: str, run_index: int, seed_index: int, proxy: bool = False
    ) -> OutputDetail:
        get_record(exp_id)
        try:
            out = store.load_output(exp_id, run_index, seed_index)
        except KeyError as exc:
            raise ApiError(404, "unknown_output", str(exc))
        _, assignment = out.config_ref
        instances = [
            {
                "ingredient": i.ingredient,
                # sphere ingredients are their own bounding-sphere proxy
                "position": list(i.position),
                "radius": i.radius,
            }
            for i in out.instances
        ]
        return OutputDetail(
            run_index=run_index,
            seed_index=seed_index,
            seed=out.seed,
            assignment=assignment,
            instances=instances,
            placed_counts=out.placed_counts,
            requested_counts=out.requested_counts,
            runtime_seconds=out.runtime_seconds,
        )

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app

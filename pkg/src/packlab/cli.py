"""Headless pipeline driver: setup, run, analyze, export, serve.

Filter mini-grammar for --filter: `name=[lo,hi]` for intervals and
`name={a,b}` for category sets; repeat the flag to AND filters together.
"""

from __future__ import annotations

import json
import os
import re
import sys
from pathlib import Path

import click

from . import xfilter
from .recipe import RecipeError, parse_recipe
from .sampler import build_job_matrix, import_experiment
from .store import Store
from .runner import run_experiment

DEFAULT_DATA_DIR = "packlab_data"


def _data_root(data: str | None) -> Path:
    return Path(data or os.environ.get("PACKLAB_DATA") or DEFAULT_DATA_DIR)


def _load_experiment_file(path: Path):
    """Experiment document from disk; a `recipe_file` key is resolved and embedded."""
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read experiment document {path}: {exc}")
    if isinstance(doc, dict) and "recipe_file" in doc:
        recipe_path = Path(doc.pop("recipe_file"))
        if not recipe_path.is_absolute():
            recipe_path = path.parent / recipe_path
        try:
            doc["recipe"] = json.loads(recipe_path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise click.ClickException(f"cannot read recipe file {recipe_path}: {exc}")
    try:
        return import_experiment(json.dumps(doc))
    except RecipeError as exc:
        raise click.ClickException(f"invalid experiment document: {exc}")


def _resolve_experiment(store: Store, experiment: str) -> str:
    """Accept either a saved experiment id or a path to a document (saved on the fly)."""
    path = Path(experiment)
    if path.exists():
        cfg = _load_experiment_file(path)
        return store.save_experiment(cfg).id
    try:
        store.load_experiment(experiment)
    except KeyError:
        raise click.ClickException(f"no experiment '{experiment}' (not an id, not a file)")
    return experiment


_FILTER_RE = re.compile(r"^(?P<name>[^=]+)=(\[(?P<lo>[^,\]]+),(?P<hi>[^,\]]+)\]|\{(?P<vals>[^}]*)\})$")


def parse_filter_expr(exprs: tuple[str, ...]) -> xfilter.RowGroup:
    filters = {}
    for expr in exprs:
        m = _FILTER_RE.match(expr.strip())
        if not m:
            raise click.ClickException(
                f"bad filter '{expr}'; expected name=[lo,hi] or name={{a,b}}"
            )
        name = m.group("name").strip()
        if m.group("vals") is not None:
            vals = [v.strip() for v in m.group("vals").split(",") if v.strip()]
            try:
                filters[name] = {float(v) for v in vals}
            except ValueError:  # categorical values stay as strings
                filters[name] = set(vals)
        else:
            try:
                filters[name] = (float(m.group("lo")), float(m.group("hi")))
            except ValueError:
                raise click.ClickException(f"bad interval in filter '{expr}'")
    return xfilter.RowGroup(filters=filters)


@click.group()
def main():
    """Parameter-space exploration for the loose-packing model."""


@main.command()
@click.option("--recipe", "recipe_path", type=click.Path(path_type=Path), default=None,
              help="Validate a recipe file.")
@click.option("--experiment", "experiment_path", type=click.Path(path_type=Path), default=None,
              help="Validate and save an experiment document.")
@click.option("--data", default=None, help="Data directory (default $PACKLAB_DATA).")
def setup(recipe_path, experiment_path, data):
    """Validate inputs and save the experiment to the data directory."""
    if recipe_path is None and experiment_path is None:
        raise click.ClickException("provide --recipe and/or --experiment")
    if recipe_path is not None:
        try:
            parse_recipe(recipe_path.read_text())
        except OSError as exc:
            raise click.ClickException(f"cannot read {recipe_path}: {exc}")
        except RecipeError as exc:
            raise click.ClickException(f"invalid recipe: {exc}")
        click.echo(f"recipe {recipe_path}: valid")
    if experiment_path is not None:
        cfg = _load_experiment_file(experiment_path)
        record = Store(_data_root(data)).save_experiment(cfg)
        total = cfg.n_configs * cfg.r_seeds
        click.echo(f"experiment {record.id}: {cfg.n_configs} runs x {cfg.r_seeds} seeds = {total} jobs")


@main.command()
@click.option("--experiment", required=True, help="Experiment id or document path.")
@click.option("--jobs", type=int, default=None, help="Worker parallelism (default: logical cores).")
@click.option("--data", default=None)
def run(experiment, jobs, data):
    """Execute the job matrix and write outputs, metrics and densities."""
    store = Store(_data_root(data))
    exp_id = _resolve_experiment(store, experiment)

    def show(done, total):
        click.echo(f"\r{done}/{total} jobs", nl=False)

    records = run_experiment(store, exp_id, jobs=jobs, progress=show)
    click.echo(f"\nexperiment {exp_id} done: {len(records)} runs summarized")


@main.command()
@click.option("--experiment", required=True)
@click.option("--filter", "filters", multiple=True,
              help="Filter expression, e.g. 'usage.A=[1,1]'; repeatable (AND).")
@click.option("--list", "list_runs", is_flag=True, help="List matching runs.")
@click.option("--table", "show_table", is_flag=True, help="Print the metric table.")
@click.option("--data", default=None)
def analyze(experiment, filters, list_runs, show_table, data):
    """Print metric tables and answer one-shot filter queries."""
    store = Store(_data_root(data))
    exp_id = _resolve_experiment(store, experiment)
    try:
        records = store.load_metrics_table(exp_id)
    except KeyError:
        raise click.ClickException(f"experiment {exp_id} has no metrics yet; run it first")
    table = xfilter.load_table(records)
    row = parse_filter_expr(filters)
    try:
        matches = xfilter.list_matching_runs(table, row)
    except xfilter.UnknownDimension as exc:
        raise click.ClickException(f"unknown dimension {exc}")
    click.echo(f"{len(matches)}/{len(table)} runs match")
    if list_runs:
        for run_index, seeds in matches:
            click.echo(f"run {run_index}: seeds {seeds}")
    if show_table:
        match_set = {i for i, _ in matches}
        names = [d.name for d in table.dimensions]
        click.echo("\t".join(["run"] + names))
        for rec in records:
            if rec["run_index"] in match_set:
                cells = [str(rec["run_index"])] + [
                    _fmt(rec.get(n)) for n in names
                ]
                click.echo("\t".join(cells))


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


@main.command()
@click.option("--experiment", required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help="Write the document here instead of stdout.")
@click.option("--data", default=None)
def export(experiment, out_path, data):
    """Emit the self-contained experiment document."""
    store = Store(_data_root(data))
    exp_id = _resolve_experiment(store, experiment)
    doc = (store.experiment_dir(exp_id) / "experiment.json").read_text()
    if out_path is None:
        click.echo(doc, nl=False)
    else:
        out_path.write_text(doc)
        click.echo(f"wrote {out_path}")


@main.command()
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--data", default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--static", "static_dir", type=click.Path(path_type=Path), default=None,
              help="Directory with the built UI bundle.")
def serve(port, host, data, jobs, static_dir):
    """Start the analysis service."""
    import uvicorn

    from .service import create_app

    app = create_app(_data_root(data), jobs=jobs, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()

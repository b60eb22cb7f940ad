"""Run-level multidimensional filtering and linked-histogram engine.

A table is an immutable column store over run summaries; filters are
client-owned row groups of AND-combined interval / category predicates.  All
queries are stateless reads, so arbitrary concurrent queries are safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np

from .metrics import RunSummary, summary_record
from .ticks import nice_bin_edges

DEFAULT_BIN_COUNT = 20


class DuplicateRun(ValueError):
    """Two summaries share a run index."""


class UnknownDimension(KeyError):
    """A filter or histogram request references a dimension the table lacks."""


@dataclass(frozen=True)
class Dimension:
    name: str
    kind: str  # "numeric", "integer" or "categorical"


@dataclass(frozen=True)
class RowGroup:
    """One independent horizontal filter row; an empty filter map selects all runs."""

    row_id: str = "row-0"
    # dimension name -> (lo, hi) closed interval, or a set/sequence of categories
    filters: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Histogram:
    dimension: str
    edges: Optional[np.ndarray]  # numeric bins; None for categorical
    categories: Optional[tuple]  # categorical values; None for numeric
    full_counts: np.ndarray
    filtered_counts: np.ndarray


class Table:
    """Immutable run-summary table with auto-registered dimensions."""

    def __init__(self, run_indices: np.ndarray, columns: dict[str, np.ndarray], seeds: list):
        self.run_indices = run_indices
        self.columns = columns
        self.seeds = seeds
        self.dimensions = tuple(
            Dimension(name=name, kind=_kind_of(col)) for name, col in columns.items()
        )

    def __len__(self) -> int:
        return len(self.run_indices)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise UnknownDimension(name) from None


def _kind_of(col: np.ndarray) -> str:
    if col.dtype == object:
        return "categorical"
    if np.issubdtype(col.dtype, np.integer):
        return "integer"
    finite = col[np.isfinite(col)]
    if finite.size and np.all(finite == np.rint(finite)):
        return "integer"
    return "numeric"


def load_table(summaries: Sequence[RunSummary] | Sequence[dict]) -> Table:
    """Build the filter table from run summaries or flat runs.jsonl records.

    One dimension per sampled parameter path and per scalar summary metric.
    """
    records = [
        s if isinstance(s, dict) else summary_record(s) for s in summaries
    ]
    indices = [r["run_index"] for r in records]
    if len(indices) != len(set(indices)):
        raise DuplicateRun("run indices must be unique")
    order = np.argsort(indices, kind="stable")
    records = [records[i] for i in order]
    run_indices = np.array([r["run_index"] for r in records], dtype=np.int64)
    seeds = [r.get("seeds", []) for r in records]

    keys: list[str] = []
    for r in records:
        for k in r:
            if k in ("run_index", "seeds"):
                continue
            if k not in keys:
                keys.append(k)

    columns: dict[str, np.ndarray] = {}
    for k in keys:
        vals = [r.get(k) for r in records]
        if any(isinstance(v, str) for v in vals):
            columns[k] = np.array(vals, dtype=object)
        else:
            columns[k] = np.array(
                [np.nan if v is None else float(v) for v in vals], dtype=float
            )
    return Table(run_indices=run_indices, columns=columns, seeds=seeds)


def _mask_for(table: Table, filters: Mapping[str, Any], exclude: Optional[str] = None) -> np.ndarray:
    mask = np.ones(len(table), dtype=bool)
    for name, pred in filters.items():
        col = table.column(name)  # raises UnknownDimension for typos even when excluded
        if name == exclude:
            continue
        if col.dtype == object:
            allowed = set(pred) if not isinstance(pred, (set, frozenset)) else pred
            mask &= np.array([v in allowed for v in col], dtype=bool)
        elif isinstance(pred, (set, frozenset)):
            mask &= np.isin(col, [float(v) for v in pred])
        else:
            lo, hi = float(pred[0]), float(pred[1])
            with np.errstate(invalid="ignore"):
                mask &= (col >= lo) & (col <= hi)
    return mask


def apply_filters(table: Table, row: RowGroup) -> np.ndarray:
    """Run indices passing every predicate of the row (AND semantics)."""
    return table.run_indices[_mask_for(table, row.filters)]


def list_matching_runs(table: Table, row: RowGroup) -> list[tuple[int, list]]:
    """Matching runs in run-index order with their seed lists (viewer dropdown feed)."""
    mask = _mask_for(table, row.filters)
    return [
        (int(table.run_indices[i]), list(table.seeds[i]))
        for i in np.flatnonzero(mask)
    ]


def histogram(
    table: Table, row: RowGroup, dimension: str, bin_count: int = DEFAULT_BIN_COUNT
) -> Histogram:
    """Full and row-filtered counts over nice bins spanning the FULL table extent.

    Crossfilter brushing semantics: the row's filter on `dimension` itself is
    excluded from that dimension's filtered counts, so the user sees what else
    their own brush would admit.
    """
    col = table.column(dimension)
    full_mask = np.ones(len(table), dtype=bool)
    filt_mask = _mask_for(table, row.filters, exclude=dimension)

    if col.dtype == object:
        categories = tuple(sorted(set(col.tolist())))
        full = np.array([int(np.sum(col == c)) for c in categories])
        filt = np.array([int(np.sum((col == c) & filt_mask)) for c in categories])
        return Histogram(
            dimension=dimension,
            edges=None,
            categories=categories,
            full_counts=full,
            filtered_counts=filt,
        )

    finite = col[np.isfinite(col)]
    if finite.size == 0:
        edges = np.array([0.0, 1.0])
    else:
        edges = nice_bin_edges(float(finite.min()), float(finite.max()), bin_count)
    valid = np.isfinite(col)
    full, _ = np.histogram(col[valid & full_mask], bins=edges)
    filt, _ = np.histogram(col[valid & filt_mask], bins=edges)
    return Histogram(
        dimension=dimension,
        edges=edges,
        categories=None,
        full_counts=full,
        filtered_counts=filt,
    )

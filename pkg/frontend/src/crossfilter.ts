/**
 * Linked-histogram coordination.
 *
 * Holds the active filter map, fans a brush change out to one histogram
 * fetch per dimension plus the matching-run list, and drops stale
 * responses when a newer brush supersedes them.
 */
import { ApiClient } from "./api.js";
import { BrushRange } from "./histogram.js";
import { FilterMap, HistogramPayload, RunsPayload } from "./types.js";

export interface CrossfilterSnapshot {
  filters: FilterMap;
  histograms: Record<string, HistogramPayload>;
  runs: RunsPayload;
}

export class CrossfilterController {
  private filters: FilterMap = {};
  private generation = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly experimentId: string,
    private readonly dimensionNames: string[],
    private readonly binCount?: number,
  ) {}

  currentFilters(): FilterMap {
    return { ...this.filters };
  }

  setFilters(filters: FilterMap): Promise<CrossfilterSnapshot | null> {
    this.filters = { ...filters };
    return this.refresh();
  }

  brush(dim: string, range: BrushRange | null): Promise<CrossfilterSnapshot | null> {
    if (range === null) {
      delete this.filters[dim];
    } else {
      this.filters[dim] = [range.lo, range.hi];
    }
    return this.refresh();
  }

  /**
   * Fetch every histogram plus the run list for the current filters.
   * Resolves null when a newer call started meanwhile (stale response).
   */
  async refresh(): Promise<CrossfilterSnapshot | null> {
    const gen = ++this.generation;
    const filters = { ...this.filters };
    const [runs, ...payloads] = await Promise.all([
      this.api.runs(this.experimentId, filters),
      ...this.dimensionNames.map((dim) =>
        this.api.histogram(this.experimentId, dim, filters, this.binCount),
      ),
    ]);
    if (gen !== this.generation) return null;
    const histograms: Record<string, HistogramPayload> = {};
    for (const p of payloads) histograms[p.dimension] = p;
    return { filters, histograms, runs };
  }
}

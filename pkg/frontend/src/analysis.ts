/**
 * Analysis screen: one linked histogram per dimension, the matching-run
 * list, and a detail panel (density heatmap + instance viewer) for the
 * selected run.
 */
import { ApiClient } from "./api.js";
import { CrossfilterController, CrossfilterSnapshot } from "./crossfilter.js";
import { BrushRange, HistogramView } from "./histogram.js";
import { AppState } from "./state.js";
import { DimensionInfo, FilterMap, RunInfo } from "./types.js";
import { ViewExtent, drawOutput } from "./viewer.js";

export class AnalysisScreen {
  readonly element: HTMLElement;
  private views = new Map<string, HistogramView>();
  private controller: CrossfilterController | null = null;
  private volume: ViewExtent | null = null;
  private runList!: HTMLElement;
  private detail!: HTMLElement;
  private summary!: HTMLElement;
  private selected: { run: number; seed: number } | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly onFiltersChanged: (filters: FilterMap) => void,
    private readonly onRunSelected: (run: number | null, seed: number | null) => void,
  ) {
    this.element = document.createElement("div");
    this.element.className = "analysis-screen";
    this.element.innerHTML = `
      <div class="summary"></div>
      <div class="histogram-grid"></div>
      <div class="bottom">
        <div class="run-list"></div>
        <div class="run-detail"></div>
      </div>
    `;
    this.summary = this.element.querySelector(".summary")!;
    this.runList = this.element.querySelector(".run-list")!;
    this.detail = this.element.querySelector(".run-detail")!;
  }

  async open(experimentId: string, state: AppState): Promise<void> {
    const [dims, doc] = await Promise.all([
      this.api.dimensions(experimentId),
      this.api.document(experimentId),
    ]);
    this.volume = doc.recipe.volume;
    const names = this.histogramDimensions(dims);
    this.controller = new CrossfilterController(this.api, experimentId, names);
    const grid = this.element.querySelector(".histogram-grid")!;
    grid.innerHTML = "";
    this.views.clear();
    for (const name of names) {
      const view = new HistogramView(name, (dim, range) => void this.brushed(dim, range));
      this.views.set(name, view);
      grid.appendChild(view.element);
    }
    this.selected =
      state.selectedRun !== null
        ? { run: state.selectedRun, seed: state.selectedSeed ?? 0 }
        : null;
    const snapshot = await this.controller.setFilters(state.filters);
    if (snapshot) this.apply(experimentId, snapshot);
    if (this.selected) void this.showDetail(experimentId, this.selected.run, this.selected.seed);
  }

  /** Parameter and metric dimensions, in a stable reading order. */
  private histogramDimensions(dims: DimensionInfo[]): string[] {
    const numeric = dims.filter((d) => d.kind === "numeric").map((d) => d.name);
    const params = numeric.filter((n) => n.startsWith("param."));
    const rest = numeric.filter((n) => !n.startsWith("param."));
    return [...params.sort(), ...rest.sort()];
  }

  private async brushed(dim: string, range: BrushRange | null): Promise<void> {
    if (!this.controller) return;
    const snapshot = await this.controller.brush(dim, range);
    if (snapshot) {
      this.onFiltersChanged(snapshot.filters);
      this.applySnapshot(snapshot);
    }
  }

  private experimentId = "";

  private apply(experimentId: string, snapshot: CrossfilterSnapshot): void {
    this.experimentId = experimentId;
    this.applySnapshot(snapshot);
  }

  private applySnapshot(snapshot: CrossfilterSnapshot): void {
    for (const [dim, view] of this.views) {
      const payload = snapshot.histograms[dim];
      if (!payload) continue;
      const pred = snapshot.filters[dim];
      const brush =
        Array.isArray(pred) ? { lo: pred[0], hi: pred[1] } : null;
      view.update(payload, brush);
    }
    this.summary.textContent =
      `${snapshot.runs.runs.length} of ${snapshot.runs.total_runs} runs match`;
    this.renderRunList(snapshot.runs.runs);
  }

  private renderRunList(runs: RunInfo[]): void {
    this.runList.innerHTML = "<h3>Matching runs</h3>";
    const ul = document.createElement("ul");
    for (const run of runs) {
      const li = document.createElement("li");
      for (let j = 0; j < run.seeds.length; j++) {
        const a = document.createElement("a");
        a.href = "#";
        a.textContent = j === 0 ? `run ${run.run_index} / seed ${j}` : String(j);
        a.addEventListener("click", (ev) => {
          ev.preventDefault();
          this.selected = { run: run.run_index, seed: j };
          this.onRunSelected(run.run_index, j);
          void this.showDetail(this.experimentId, run.run_index, j);
        });
        li.appendChild(a);
        li.appendChild(document.createTextNode(" "));
      }
      ul.appendChild(li);
    }
    this.runList.appendChild(ul);
  }

  private async showDetail(experimentId: string, run: number, seed: number): Promise<void> {
    if (!this.volume) return;
    this.detail.innerHTML = `<h3>run ${run}, seed ${seed}</h3>`;
    const img = document.createElement("img");
    img.className = "heatmap";
    img.alt = "mean density projection";
    img.src = this.api.heatmapUrl(experimentId, run, "z");
    this.detail.appendChild(img);
    const canvas = document.createElement("canvas");
    canvas.width = 280;
    canvas.height = 280;
    this.detail.appendChild(canvas);
    const table = document.createElement("pre");
    this.detail.appendChild(table);
    try {
      const out = await this.api.output(experimentId, run, seed);
      drawOutput(canvas, out, this.volume);
      const lines = Object.entries(out.assignment).map(([k, v]) => `${k} = ${v}`);
      lines.push(
        ...Object.keys(out.requested_counts).sort().map(
          (n) => `${n}: ${out.placed_counts[n]}/${out.requested_counts[n]} placed`,
        ),
        `cost ${out.runtime_seconds.toFixed(6)} s`,
      );
      table.textContent = lines.join("\n");
    } catch (err) {
      table.textContent = String(err);
    }
  }
}

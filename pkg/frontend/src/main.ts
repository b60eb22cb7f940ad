/** Entry point: hash routing, state sync, screen switching. */
import { AnalysisScreen } from "./analysis.js";
import { ApiClient } from "./api.js";
import { InputScreen } from "./input.js";
import {
  AppState,
  DEFAULT_STATE,
  decodeState,
  encodeState,
  filtersEqual,
} from "./state.js";
import { FilterMap, StatusPayload } from "./types.js";

class App {
  private state: AppState = DEFAULT_STATE;
  private readonly api = new ApiClient("");
  private readonly input: InputScreen;
  private readonly analysis: AnalysisScreen;
  private readonly container: HTMLElement;
  private readonly picker: HTMLSelectElement;
  private openedExperiment: string | null = null;

  constructor(root: HTMLElement) {
    root.innerHTML = `
      <header>
        <h1>packlab</h1>
        <nav>
          <a href="#screen=input">new experiment</a>
          <select class="experiment-picker"><option value="">open experiment…</option></select>
        </nav>
      </header>
      <main></main>
    `;
    this.container = root.querySelector("main")!;
    this.picker = root.querySelector(".experiment-picker")!;
    this.picker.addEventListener("change", () => {
      if (this.picker.value) {
        this.navigate({
          ...DEFAULT_STATE,
          screen: "analysis",
          experiment: this.picker.value,
        });
      }
    });
    this.input = new InputScreen(this.api, (id) => this.watchUntilDone(id));
    this.analysis = new AnalysisScreen(
      this.api,
      (filters) => this.filtersChanged(filters),
      (run, seed) => {
        this.state = { ...this.state, selectedRun: run, selectedSeed: seed };
        this.writeUrl();
      },
    );
    window.addEventListener("hashchange", () => void this.route());
    void this.refreshPicker();
    void this.route();
  }

  private async refreshPicker(): Promise<void> {
    let experiments: StatusPayload[] = [];
    try {
      experiments = await this.api.listExperiments();
    } catch {
      return; // picker stays empty when the service is unreachable
    }
    while (this.picker.options.length > 1) this.picker.remove(1);
    for (const exp of experiments) {
      const opt = document.createElement("option");
      opt.value = exp.id;
      opt.textContent = `${exp.id} (${exp.status})`;
      this.picker.add(opt);
    }
  }

  private navigate(state: AppState): void {
    this.state = state;
    this.writeUrl();
    void this.route();
  }

  private writeUrl(): void {
    const hash = encodeState(this.state);
    if (window.location.hash !== hash) {
      history.replaceState(null, "", hash);
    }
  }

  private async route(): Promise<void> {
    const fromUrl = decodeState(window.location.hash);
    const reopen =
      fromUrl.screen === "analysis" &&
      (fromUrl.experiment !== this.openedExperiment ||
        !filtersEqual(fromUrl.filters, this.state.filters));
    this.state = fromUrl;
    this.container.innerHTML = "";
    if (this.state.screen === "analysis" && this.state.experiment) {
      this.container.appendChild(this.analysis.element);
      if (reopen) {
        this.openedExperiment = this.state.experiment;
        await this.analysis.open(this.state.experiment, this.state);
      }
    } else {
      this.container.appendChild(this.input.element);
    }
  }

  private filtersChanged(filters: FilterMap): void {
    this.state = { ...this.state, filters };
    this.writeUrl();
  }

  /** Poll a freshly launched experiment, then jump to analysis. */
  private async watchUntilDone(id: string): Promise<void> {
    void this.refreshPicker();
    for (;;) {
      const status = await this.api.status(id);
      if (status.status === "done") break;
      if (status.status === "failed") return;
      await new Promise((r) => setTimeout(r, 500));
    }
    this.navigate({ ...DEFAULT_STATE, screen: "analysis", experiment: id });
  }
}

new App(document.getElementById("app")!);

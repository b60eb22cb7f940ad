/**
 * Input screen: author a recipe and a parameter sweep, then create and
 * launch the experiment in one click.
 */
import { ApiClient, ApiError } from "./api.js";
import {
  ExperimentForm,
  IngredientForm,
  SpecForm,
  buildExperimentDocument,
  validateForm,
} from "./document.js";

interface IngredientRow {
  root: HTMLElement;
  read(): IngredientForm;
}

interface SpecRow {
  root: HTMLElement;
  read(): SpecForm;
}

export class InputScreen {
  readonly element: HTMLElement;
  private ingredientRows: IngredientRow[] = [];
  private specRows: SpecRow[] = [];
  private ingredientList!: HTMLElement;
  private specList!: HTMLElement;
  private messages!: HTMLElement;

  constructor(
    private readonly api: ApiClient,
    private readonly onLaunched: (experimentId: string) => void,
  ) {
    this.element = document.createElement("div");
    this.element.className = "input-screen";
    this.build();
    this.addIngredientRow();
  }

  /** The document the Create button will submit, given the current form. */
  readDocument() {
    return buildExperimentDocument(this.readForm());
  }

  readForm(): ExperimentForm {
    return {
      recipe: {
        name: this.value("recipe-name"),
        mode: this.value("volume-mode") as "box3d" | "plane2d" | "sphere_surface",
        extents: this.value("extents").split(",").map(Number),
        periodic: (this.field("periodic") as HTMLInputElement).checked,
        grid_spacing: Number(this.value("grid-spacing")),
        ingredients: this.ingredientRows.map((r) => r.read()),
      },
      specs: this.specRows.map((r) => r.read()),
      n_configs: Number(this.value("n-configs")),
      r_seeds: Number(this.value("r-seeds")),
      base_seed: Number(this.value("base-seed")),
    };
  }

  private build(): void {
    this.element.innerHTML = `
      <h2>New experiment</h2>
      <fieldset>
        <legend>Recipe</legend>
        <label>Name <input name="recipe-name" value="untitled"></label>
        <label>Volume
          <select name="volume-mode">
            <option value="plane2d">plane (2D)</option>
            <option value="box3d">box (3D)</option>
            <option value="sphere_surface">sphere surface</option>
          </select>
        </label>
        <label>Extents <input name="extents" value="100, 100" size="10"></label>
        <label>Periodic <input type="checkbox" name="periodic"></label>
        <label>Grid spacing <input name="grid-spacing" value="5" size="4"></label>
        <div class="ingredient-list"></div>
        <button type="button" class="add-ingredient">+ ingredient</button>
      </fieldset>
      <fieldset>
        <legend>Parameter sweep</legend>
        <div class="spec-list"></div>
        <button type="button" class="add-spec">+ parameter</button>
        <label>Configurations (N) <input name="n-configs" value="10" size="4"></label>
        <label>Seeds per run (R) <input name="r-seeds" value="5" size="4"></label>
        <label>Base seed <input name="base-seed" value="0" size="8"></label>
      </fieldset>
      <div class="messages"></div>
      <button type="button" class="launch">Create &amp; run</button>
    `;
    this.ingredientList = this.element.querySelector(".ingredient-list")!;
    this.specList = this.element.querySelector(".spec-list")!;
    this.messages = this.element.querySelector(".messages")!;
    this.element.querySelector(".add-ingredient")!
      .addEventListener("click", () => this.addIngredientRow());
    this.element.querySelector(".add-spec")!
      .addEventListener("click", () => this.addSpecRow());
    this.element.querySelector(".launch")!
      .addEventListener("click", () => void this.launch());
  }

  addIngredientRow(preset?: Partial<IngredientForm>): void {
    const root = document.createElement("div");
    root.className = "row ingredient-row";
    root.innerHTML = `
      <input name="ing-name" placeholder="name" size="6" value="${preset?.name ?? ""}">
      <input name="ing-radius" placeholder="radius" size="5" value="${preset?.radius ?? ""}">
      <input name="ing-count" placeholder="count" size="5" value="${preset?.count ?? ""}">
      <input name="ing-nbj" placeholder="jitter tries" size="5" value="${preset?.nb_jitter ?? ""}">
      <input name="ing-rej" placeholder="give-up" size="5" value="${preset?.rejection_threshold ?? ""}">
      <button type="button" class="remove">x</button>
    `;
    const row: IngredientRow = {
      root,
      read: () => {
        const get = (n: string) =>
          (root.querySelector(`[name=${n}]`) as HTMLInputElement).value.trim();
        const form: IngredientForm = {
          name: get("ing-name"),
          radius: Number(get("ing-radius")),
          count: Number(get("ing-count")),
        };
        if (get("ing-nbj")) form.nb_jitter = Number(get("ing-nbj"));
        if (get("ing-rej")) form.rejection_threshold = Number(get("ing-rej"));
        return form;
      },
    };
    root.querySelector(".remove")!.addEventListener("click", () => {
      this.ingredientRows = this.ingredientRows.filter((r) => r !== row);
      root.remove();
    });
    this.ingredientRows.push(row);
    this.ingredientList.appendChild(root);
  }

  addSpecRow(preset?: Partial<SpecForm>): void {
    const root = document.createElement("div");
    root.className = "row spec-row";
    root.innerHTML = `
      <input name="spec-target" placeholder="ingredient.&lt;name&gt;.&lt;field&gt;" size="22"
             value="${preset?.target ?? ""}">
      <select name="spec-kind">
        <option value="integer">integer</option>
        <option value="numeric">numeric</option>
      </select>
      <select name="spec-method">
        <option value="even">even steps</option>
        <option value="uniform_random">uniform random</option>
      </select>
      <input name="spec-lo" placeholder="from" size="5" value="${preset?.lo ?? ""}">
      <input name="spec-hi" placeholder="to" size="5" value="${preset?.hi ?? ""}">
      <input name="spec-k" placeholder="steps" size="4" value="${preset?.k_steps ?? ""}">
      <button type="button" class="remove">x</button>
    `;
    if (preset?.kind) {
      (root.querySelector("[name=spec-kind]") as HTMLSelectElement).value = preset.kind;
    }
    if (preset?.method) {
      (root.querySelector("[name=spec-method]") as HTMLSelectElement).value = preset.method;
    }
    const row: SpecRow = {
      root,
      read: () => {
        const get = (n: string) =>
          (root.querySelector(`[name=${n}]`) as HTMLInputElement | HTMLSelectElement)
            .value.trim();
        const form: SpecForm = {
          target: get("spec-target"),
          kind: get("spec-kind") as SpecForm["kind"],
          method: get("spec-method") as SpecForm["method"],
          lo: Number(get("spec-lo")),
          hi: Number(get("spec-hi")),
        };
        if (get("spec-k")) form.k_steps = Number(get("spec-k"));
        return form;
      },
    };
    root.querySelector(".remove")!.addEventListener("click", () => {
      this.specRows = this.specRows.filter((r) => r !== row);
      root.remove();
    });
    this.specRows.push(row);
    this.specList.appendChild(root);
  }

  private value(name: string): string {
    return (this.field(name) as HTMLInputElement | HTMLSelectElement).value;
  }

  private field(name: string): Element {
    return this.element.querySelector(`[name=${name}]`)!;
  }

  private async launch(): Promise<void> {
    const form = this.readForm();
    const problems = validateForm(form);
    if (problems.length > 0) {
      this.showMessages(problems, true);
      return;
    }
    try {
      const created = await this.api.createExperiment(buildExperimentDocument(form));
      await this.api.runExperiment(created.id);
      this.showMessages(
        [`experiment ${created.id} launched (${created.total_jobs} jobs)`],
        false,
      );
      this.onLaunched(created.id);
    } catch (err) {
      const msg = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      this.showMessages([msg], true);
    }
  }

  private showMessages(lines: string[], isError: boolean): void {
    this.messages.className = isError ? "messages error" : "messages ok";
    this.messages.textContent = lines.join("\n");
  }
}

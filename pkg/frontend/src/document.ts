/**
 * Experiment document construction.
 *
 * The input screen collects a sparse form; this module normalizes it into
 * the fully-defaulted document shape the service stores, so that a
 * UI-authored experiment is structurally identical to a file-authored one
 * (same keys, same defaults) and hashes to the same experiment id.
 */
import {
  ExperimentDoc,
  IngredientDoc,
  ParameterSpecDoc,
  PartnerDoc,
  RecipeDoc,
} from "./types.js";

export interface IngredientForm {
  name: string;
  radius: number;
  count: number;
  nb_jitter?: number;
  jitter_max?: number;
  rejection_threshold?: number;
  partners?: { name: string; weight?: number; binding_distance: number }[];
}

export interface RecipeForm {
  name: string;
  mode: "box3d" | "plane2d" | "sphere_surface";
  extents: number[];
  periodic?: boolean;
  grid_spacing: number;
  point_selection?: "random" | "ordered";
  ingredient_order?: "by_radius_desc" | "random_interleave";
  seed?: number;
  ingredients: IngredientForm[];
}

export interface SpecForm {
  target: string;
  kind: "numeric" | "integer" | "categorical";
  method: "even" | "uniform_random";
  lo: number;
  hi: number;
  k_steps?: number;
}

export interface ExperimentForm {
  recipe: RecipeForm;
  specs: SpecForm[];
  n_configs: number;
  r_seeds: number;
  base_seed: number;
  density_dims?: number[];
}

const NB_JITTER_DEFAULT = 10;
const REJECTION_DEFAULT = 100;
const PARTNER_WEIGHT_DEFAULT = 0.5;

export function normalizeRecipe(form: RecipeForm): RecipeDoc {
  const ingredients: IngredientDoc[] = form.ingredients.map((ing) => ({
    name: ing.name,
    radius: ing.radius,
    count: ing.count,
    nb_jitter: ing.nb_jitter ?? NB_JITTER_DEFAULT,
    // an unset jitter radius follows the drop-point grid spacing
    jitter_max: ing.jitter_max ?? form.grid_spacing,
    rejection_threshold: ing.rejection_threshold ?? REJECTION_DEFAULT,
    partners: (ing.partners ?? []).map(
      (p): PartnerDoc => ({
        name: p.name,
        weight: p.weight ?? PARTNER_WEIGHT_DEFAULT,
        binding_distance: p.binding_distance,
      }),
    ),
  }));
  return {
    name: form.name,
    volume: {
      mode: form.mode,
      extents: padExtents(form.mode, form.extents),
      periodic: form.periodic ?? false,
    },
    defaults: {
      grid_spacing: form.grid_spacing,
      point_selection: form.point_selection ?? "random",
      ingredient_order: form.ingredient_order ?? "by_radius_desc",
      seed: form.seed ?? 0,
    },
    ingredients,
  };
}

function padExtents(mode: string, extents: number[]): number[] {
  if (mode === "plane2d") {
    return [extents[0], extents[1], 0];
  }
  if (mode === "sphere_surface") {
    const r = extents[0];
    return [r, r, r];
  }
  return extents.slice(0, 3);
}

export function normalizeSpec(form: SpecForm): ParameterSpecDoc {
  const doc: ParameterSpecDoc = {
    target: form.target,
    kind: form.kind,
    method: form.method,
    domain: [form.lo, form.hi],
  };
  if (form.method === "even") {
    doc.k_steps = form.k_steps;
  }
  return doc;
}

export function buildExperimentDocument(form: ExperimentForm): ExperimentDoc {
  return {
    format_version: 1,
    recipe: normalizeRecipe(form.recipe),
    specs: form.specs.map(normalizeSpec),
    n_configs: form.n_configs,
    r_seeds: form.r_seeds,
    base_seed: form.base_seed,
    output_location: "",
    density_dims: form.density_dims ?? [16, 16, 16],
  };
}

/** Problems that would be rejected server-side; checked before submitting. */
export function validateForm(form: ExperimentForm): string[] {
  const out: string[] = [];
  if (!form.recipe.name.trim()) out.push("recipe needs a name");
  if (form.recipe.ingredients.length === 0) out.push("add at least one ingredient");
  const seen = new Set<string>();
  for (const ing of form.recipe.ingredients) {
    if (!ing.name.trim()) out.push("every ingredient needs a name");
    if (seen.has(ing.name)) out.push(`duplicate ingredient name '${ing.name}'`);
    seen.add(ing.name);
    if (!(ing.radius > 0)) out.push(`${ing.name}: radius must be positive`);
    if (!(ing.count >= 0)) out.push(`${ing.name}: count must be >= 0`);
  }
  if (!(form.recipe.grid_spacing > 0)) out.push("grid spacing must be positive");
  if (!(form.n_configs >= 1)) out.push("n_configs must be >= 1");
  if (!(form.r_seeds >= 1)) out.push("r_seeds must be >= 1");
  for (const spec of form.specs) {
    if (!spec.target.trim()) out.push("every parameter spec needs a target");
    if (!(spec.lo <= spec.hi)) out.push(`${spec.target}: empty domain`);
    if (spec.method === "even" && !((spec.k_steps ?? 0) >= 2)) {
      out.push(`${spec.target}: even sampling needs k_steps >= 2`);
    }
  }
  return out;
}

/** Wire types shared with the REST service. */

export interface PartnerDoc {
  name: string;
  weight: number;
  binding_distance: number;
}

export interface IngredientDoc {
  name: string;
  radius: number;
  count: number;
  nb_jitter: number;
  jitter_max: number;
  rejection_threshold: number;
  partners: PartnerDoc[];
}

export interface RecipeDoc {
  name: string;
  volume: {
    mode: "box3d" | "plane2d" | "sphere_surface";
    extents: number[];
    periodic: boolean;
  };
  defaults: {
    grid_spacing: number;
    point_selection: "random" | "ordered";
    ingredient_order: "by_radius_desc" | "random_interleave";
    seed: number;
  };
  ingredients: IngredientDoc[];
}

export interface ParameterSpecDoc {
  target: string;
  kind: "numeric" | "integer" | "categorical";
  method: "even" | "uniform_random";
  domain: number[];
  k_steps?: number;
}

export interface ExperimentDoc {
  format_version: number;
  recipe: RecipeDoc;
  specs: ParameterSpecDoc[];
  n_configs: number;
  r_seeds: number;
  base_seed: number;
  output_location: string;
  density_dims: number[];
}

/** Interval filter, or an explicit value set. */
export type FilterPredicate = [number, number] | { values: (number | string)[] };
export type FilterMap = Record<string, FilterPredicate>;

export interface StatusPayload {
  id: string;
  status: "created" | "running" | "done" | "failed";
  progress: number;
  total_jobs: number;
}

export interface DimensionInfo {
  name: string;
  kind: "numeric" | "categorical";
  min: number | null;
  max: number | null;
  categories: string[] | null;
}

export interface HistogramPayload {
  dimension: string;
  edges: number[] | null;
  categories: (number | string)[] | null;
  full_counts: number[];
  filtered_counts: number[];
  total_runs: number;
  matching_runs: number;
}

export interface RunInfo {
  run_index: number;
  seeds: number[];
}

export interface RunsPayload {
  runs: RunInfo[];
  total_runs: number;
}

export interface InstanceDoc {
  ingredient: string;
  position: [number, number, number];
  radius: number;
}

export interface OutputDetail {
  run_index: number;
  seed_index: number;
  seed: number;
  assignment: Record<string, number | string>;
  instances: InstanceDoc[];
  placed_counts: Record<string, number>;
  requested_counts: Record<string, number>;
  runtime_seconds: number;
}

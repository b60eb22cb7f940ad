/**
 * URL-serialized application state.
 *
 * Everything needed to reproduce an analysis view lives in the location
 * hash — experiment id, brushed filters, selected run — so a copied URL
 * opens the same view, filters included, in another session.
 */
import { FilterMap, FilterPredicate } from "./types.js";

export interface AppState {
  screen: "input" | "analysis";
  experiment: string | null;
  filters: FilterMap;
  selectedRun: number | null;
  selectedSeed: number | null;
}

export const DEFAULT_STATE: AppState = {
  screen: "input",
  experiment: null,
  filters: {},
  selectedRun: null,
  selectedSeed: null,
};

export function encodeState(state: AppState): string {
  const params = new URLSearchParams();
  params.set("screen", state.screen);
  if (state.experiment) params.set("exp", state.experiment);
  if (Object.keys(state.filters).length > 0) {
    params.set("filters", JSON.stringify(sortedFilters(state.filters)));
  }
  if (state.selectedRun !== null) params.set("run", String(state.selectedRun));
  if (state.selectedSeed !== null) params.set("seed", String(state.selectedSeed));
  return "#" + params.toString();
}

export function decodeState(hash: string): AppState {
  const params = new URLSearchParams(hash.replace(/^#/, ""));
  const screen = params.get("screen") === "analysis" ? "analysis" : "input";
  const state: AppState = {
    ...DEFAULT_STATE,
    screen,
    experiment: params.get("exp"),
    filters: {},
  };
  const rawFilters = params.get("filters");
  if (rawFilters) {
    try {
      state.filters = parseFilters(JSON.parse(rawFilters));
    } catch {
      state.filters = {}; // a mangled URL degrades to the unfiltered view
    }
  }
  const run = params.get("run");
  if (run !== null && /^\d+$/.test(run)) state.selectedRun = parseInt(run, 10);
  const seed = params.get("seed");
  if (seed !== null && /^\d+$/.test(seed)) state.selectedSeed = parseInt(seed, 10);
  return state;
}

function parseFilters(obj: unknown): FilterMap {
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) return {};
  const out: FilterMap = {};
  for (const [name, pred] of Object.entries(obj)) {
    if (Array.isArray(pred) && pred.length === 2 && pred.every((v) => typeof v === "number")) {
      out[name] = [pred[0], pred[1]];
    } else if (
      typeof pred === "object" &&
      pred !== null &&
      Array.isArray((pred as { values?: unknown }).values)
    ) {
      out[name] = { values: (pred as { values: (number | string)[] }).values };
    }
  }
  return out;
}

/** Key-sorted copy so equal filter maps always serialize identically. */
function sortedFilters(filters: FilterMap): FilterMap {
  const out: FilterMap = {};
  for (const name of Object.keys(filters).sort()) {
    out[name] = filters[name];
  }
  return out;
}

export function filtersEqual(a: FilterMap, b: FilterMap): boolean {
  return (
    JSON.stringify(sortedFilters(a)) === JSON.stringify(sortedFilters(b))
  );
}

export function withFilter(
  state: AppState,
  dim: string,
  pred: FilterPredicate | null,
): AppState {
  const filters = { ...state.filters };
  if (pred === null) {
    delete filters[dim];
  } else {
    filters[dim] = pred;
  }
  return { ...state, filters };
}

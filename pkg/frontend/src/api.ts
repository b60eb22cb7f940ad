/** Typed client for the packing service REST endpoints. */
import {
  DimensionInfo,
  ExperimentDoc,
  FilterMap,
  HistogramPayload,
  OutputDetail,
  RunsPayload,
  StatusPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = fetch.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, init);
    if (!resp.ok) {
      let code = "http_error";
      let message = `${resp.status} ${resp.statusText}`;
      try {
        const body = await resp.json();
        if (body?.error) {
          code = body.error.code ?? code;
          message = body.error.message ?? message;
        }
      } catch {
        // non-JSON error body; keep the HTTP status text
      }
      throw new ApiError(resp.status, code, message);
    }
    return resp.json() as Promise<T>;
  }

  listExperiments(): Promise<StatusPayload[]> {
    return this.request("/api/experiments");
  }

  createExperiment(doc: ExperimentDoc): Promise<{ id: string; status: string; total_jobs: number }> {
    return this.request("/api/experiments", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(doc),
    });
  }

  runExperiment(id: string): Promise<StatusPayload> {
    return this.request(`/api/experiments/${id}/run`, { method: "POST" });
  }

  status(id: string): Promise<StatusPayload> {
    return this.request(`/api/experiments/${id}/status`);
  }

  document(id: string): Promise<ExperimentDoc> {
    return this.request(`/api/experiments/${id}/document`);
  }

  dimensions(id: string): Promise<DimensionInfo[]> {
    return this.request(`/api/experiments/${id}/dimensions`);
  }

  histogram(
    id: string,
    dim: string,
    filters: FilterMap,
    bins?: number,
  ): Promise<HistogramPayload> {
    const params = new URLSearchParams({ dim });
    if (bins !== undefined) params.set("bins", String(bins));
    const encoded = encodeFilters(filters);
    if (encoded !== null) params.set("filters", encoded);
    return this.request(`/api/experiments/${id}/histogram?${params}`);
  }

  runs(id: string, filters: FilterMap): Promise<RunsPayload> {
    const params = new URLSearchParams();
    const encoded = encodeFilters(filters);
    if (encoded !== null) params.set("filters", encoded);
    const suffix = params.size > 0 ? `?${params}` : "";
    return this.request(`/api/experiments/${id}/runs${suffix}`);
  }

  output(id: string, runIndex: number, seedIndex: number): Promise<OutputDetail> {
    return this.request(`/api/experiments/${id}/runs/${runIndex}/outputs/${seedIndex}`);
  }

  heatmapUrl(id: string, runIndex: number, axis: string, mode = "combined"): string {
    return `${this.base}/api/experiments/${id}/runs/${runIndex}/heatmap?axis=${axis}&mode=${encodeURIComponent(mode)}`;
  }
}

/** Wire format: {dim: [lo, hi]} or {dim: {"values": [...]}}; null when empty. */
export function encodeFilters(filters: FilterMap): string | null {
  const names = Object.keys(filters).sort();
  if (names.length === 0) return null;
  const obj: Record<string, unknown> = {};
  for (const name of names) obj[name] = filters[name];
  return JSON.stringify(obj);
}

/** Typed client for the run service. Every number the UI displays comes
 * from these endpoints; the client never computes statistics itself. */

export type RunState = "queued" | "scoring" | "fitting" | "done" | "failed";

export interface RunStatus {
  run_id: string;
  state: RunState;
  probes_done: number;
  probes_total: number;
  error?: string | null;
  retriable?: boolean | null;
}

export interface CiPoint {
  x: number;
  lower_f: number;
  upper_f: number;
  lower_m: number;
  upper_m: number;
}

export interface FitSummary {
  degree: number;
  coeffs_female: number[];
  coeffs_male: number[];
  slope_female: number;
  slope_male: number;
  pearson_female: number | null;
  pearson_male: number | null;
  ci: CiPoint[];
}

export interface AxisInfo {
  category: string;
  values: string[];
}

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly retriable: boolean | null = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly fetchFn: FetchFn;

  constructor(fetchFn?: FetchFn, private readonly base = "") {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) {
      let message = `request failed with status ${response.status}`;
      let retriable: boolean | null = null;
      try {
        const body = await response.json();
        if (body && typeof body.error === "string") {
          message = body.error;
        }
        if (body && typeof body.retriable === "boolean") {
          retriable = body.retriable;
        }
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ApiError(message, response.status, retriable);
    }
    return response;
  }

  async axis(category: string): Promise<AxisInfo> {
    const response = await this.request(`/api/axes/${encodeURIComponent(category)}`);
    return response.json();
  }

  async submitRun(config: object): Promise<{ run_id: string; created: boolean }> {
    const response = await this.request("/api/runs", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(config),
    });
    return response.json();
  }

  async runIndex(): Promise<RunStatus[]> {
    const response = await this.request("/api/runs");
    const body = await response.json();
    return body.runs as RunStatus[];
  }

  async runStatus(runId: string): Promise<RunStatus> {
    const response = await this.request(`/api/runs/${runId}`);
    return response.json();
  }

  async series(runId: string): Promise<string> {
    const response = await this.request(`/api/runs/${runId}/series`);
    return response.text();
  }

  async fit(runId: string, degree?: number): Promise<FitSummary> {
    const query = degree === undefined ? "" : `?degree=${degree}`;
    const response = await this.request(`/api/runs/${runId}/fit${query}`);
    return response.json();
  }
}

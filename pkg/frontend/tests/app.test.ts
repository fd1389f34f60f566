import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, FitSummary, RunStatus } from "../src/api.js";
import { App, createApp } from "../src/app.js";
import { SERIES_HEADER } from "../src/csv.js";

const RUN_A = "a".repeat(16);
const RUN_B = "b".repeat(16);

function dateValues(): string[] {
  return Array.from({ length: 22 }, (_, i) => String(1801 + 10 * i));
}

function seriesCsv(values: string[], femaleBase = 0.28): string {
  const n = values.length;
  const rows = values.map((value, i) => {
    const female = femaleBase + (0.33 * i) / (n - 1);
    const male = 0.7 - (0.3 * i) / (n - 1);
    return `${i},${value},${female.toFixed(6)},${male.toFixed(6)},36`;
  });
  return [SERIES_HEADER, ...rows, ""].join("\n");
}

function fitFor(n: number, degree = 1): FitSummary {
  return {
    degree,
    coeffs_female: [0.28, 0.33, ...Array(degree - 1).fill(0)],
    coeffs_male: [0.7, -0.3, ...Array(degree - 1).fill(0)],
    slope_female: 0.33,
    slope_male: -0.3,
    pearson_female: 0.991,
    pearson_male: -0.972,
    ci: Array.from({ length: n }, (_, i) => {
      const x = n === 1 ? 0 : i / (n - 1);
      const f = 0.28 + 0.33 * x;
      const m = 0.7 - 0.3 * x;
      return { x, lower_f: f - 0.02, upper_f: f + 0.02, lower_m: m - 0.02, upper_m: m + 0.02 };
    }),
  };
}

interface FakeRun {
  statusQueue: RunStatus[];
  series: string;
  fit: FitSummary | ((degree: number) => FitSummary);
  fitError?: { status: number; error: string };
}

/** Response stand-in so the client never needs the real fetch machinery. */
function reply(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText: "",
    json: async () => JSON.parse(typeof body === "string" ? JSON.stringify(body) : JSON.stringify(body)),
    text: async () => (typeof body === "string" ? body : JSON.stringify(body)),
  } as unknown as Response;
}

class FakeBackend {
  posts: Array<Record<string, unknown>> = [];
  fitDegrees: Array<string | null> = [];
  index: RunStatus[] = [];
  runs = new Map<string, FakeRun>();
  submitResult = { run_id: RUN_A, created: true };

  fetchFn = async (input: string, init?: RequestInit): Promise<Response> => {
    const url = new URL(input, "http://localhost");
    const path = url.pathname;
    if (path === "/api/runs" && init?.method === "POST") {
      this.posts.push(JSON.parse(String(init.body)));
      return reply(202, this.submitResult);
    }
    if (path === "/api/runs") {
      return reply(200, { runs: this.index });
    }
    if (path.startsWith("/api/axes/")) {
      const category = path.split("/").pop()!;
      if (category === "date") {
        return reply(200, { category, values: dateValues() });
      }
      return reply(404, { error: `unknown category ${category}` });
    }
    const parts = path.split("/").filter(Boolean); // api, runs, id, artifact?
    const run = this.runs.get(parts[2]);
    if (!run) {
      return reply(404, { error: `unknown run ${parts[2]}` });
    }
    if (parts.length === 3) {
      const status =
        run.statusQueue.length > 1 ? run.statusQueue.shift()! : run.statusQueue[0];
      return reply(200, status);
    }
    if (parts[3] === "series") {
      return reply(200, run.series);
    }
    if (parts[3] === "fit") {
      if (run.fitError) {
        return reply(run.fitError.status, { error: run.fitError.error });
      }
      const degree = url.searchParams.get("degree");
      this.fitDegrees.push(degree);
      const fit =
        typeof run.fit === "function" ? run.fit(degree ? Number(degree) : 1) : run.fit;
      return reply(200, fit);
    }
    return reply(404, { error: `unhandled path ${path}` });
  };

  addCompletedRun(runId: string, values: string[] = dateValues()): void {
    const status: RunStatus = {
      run_id: runId,
      state: "done",
      probes_done: values.length,
      probes_total: values.length,
    };
    this.index.push(status);
    this.runs.set(runId, {
      statusQueue: [status],
      series: seriesCsv(values),
      fit: (degree) => fitFor(values.length, degree),
    });
  }
}

async function boot(backend: FakeBackend): Promise<{ app: App; root: HTMLElement }> {
  document.body.innerHTML = '<div id="app"></div>';
  const root = document.getElementById("app") as HTMLElement;
  const app = createApp(root, {
    api: new ApiClient(backend.fetchFn),
    pollIntervalMs: 1,
  });
  await app.init();
  return { app, root };
}

function queueFreshRun(backend: FakeBackend, runId: string): void {
  backend.runs.set(runId, {
    statusQueue: [
      { run_id: runId, state: "scoring", probes_done: 180, probes_total: 396 },
      { run_id: runId, state: "done", probes_done: 396, probes_total: 396 },
    ],
    series: seriesCsv(dateValues()),
    fit: (degree) => fitFor(22, degree),
  });
}

describe("submit and poll", () => {
  let backend: FakeBackend;

  beforeEach(() => {
    backend = new FakeBackend();
    queueFreshRun(backend, RUN_A);
  });

  it("runs the default date form to a rendered chart", async () => {
    const { app, root } = await boot(backend);
    const view = await app.submitRun();

    expect(view?.runId).toBe(RUN_A);
    expect(backend.posts).toHaveLength(1);
    expect(backend.posts[0]).toMatchObject({
      scorer: { type: "synthetic" },
      category: "date",
    });
    expect(root.querySelector(".run-state")?.textContent).toBe("done");
    expect(root.querySelectorAll(".xlabel")).toHaveLength(22);
    expect(root.querySelectorAll(".fit-curve")).toHaveLength(2);
    expect(root.querySelectorAll(".ci-band")).toHaveLength(2);
    expect(root.querySelector('[data-coef="r_f"]')?.textContent).toBe("0.991");
    expect(root.querySelector('[data-coef="slope_m"]')?.textContent).toBe("-0.300");
  });

  it("re-fits through the service without a second submission", async () => {
    const { app, root } = await boot(backend);
    await app.submitRun();
    backend.fitDegrees = [];

    await app.changeDegree(RUN_A, 3);

    expect(backend.fitDegrees).toEqual(["3"]);
    expect(backend.posts).toHaveLength(1); // no re-scoring, no new run
    expect(root.querySelectorAll(".fit-curve")).toHaveLength(2);
    expect((root.querySelector(".degree-select") as HTMLSelectElement).value).toBe("3");
  });

  it("blocks invalid templates before any request", async () => {
    const { app, root } = await boot(backend);
    const template = root.querySelector("#template-text") as HTMLTextAreaElement;
    template.value = "{mask} met {mask} in {w}.";
    template.dispatchEvent(new Event("input", { bubbles: true }));

    expect((root.querySelector("#submit") as HTMLButtonElement).disabled).toBe(true);
    const view = await app.submitRun();
    expect(view).toBeNull();
    expect(backend.posts).toHaveLength(0);
    expect(root.querySelector("#form-problems")?.textContent).toContain("{mask}");
  });

  it("flags degenerate statistics and renders a fit-less scatter", async () => {
    backend.runs.get(RUN_A)!.fitError = {
      status: 409,
      error: "degenerate statistics: both gender series are constant",
    };
    const { app, root } = await boot(backend);
    await app.submitRun();

    const flag = root.querySelector(".degenerate-flag") as HTMLElement;
    expect(flag.hidden).toBe(false);
    expect(flag.textContent).toContain("degenerate");
    expect(root.querySelectorAll(".fit-curve")).toHaveLength(0);
    expect(root.querySelectorAll(".ci-band")).toHaveLength(0);
    expect(root.querySelectorAll("circle.pt")).toHaveLength(44);
  });

  it("surfaces failed runs with the server message", async () => {
    backend.runs.set(RUN_A, {
      statusQueue: [
        { run_id: RUN_A, state: "scoring", probes_done: 10, probes_total: 396 },
        {
          run_id: RUN_A,
          state: "failed",
          probes_done: 10,
          probes_total: 396,
          error: "scorer failure at probe 10",
          retriable: true,
        },
      ],
      series: "",
      fit: fitFor(22),
    });
    const { app, root } = await boot(backend);
    await app.submitRun();

    const line = root.querySelector(".run-error") as HTMLElement;
    expect(line.hidden).toBe(false);
    expect(line.textContent).toContain("scorer failure at probe 10");
    expect(line.textContent).toContain("retriable");
  });
});

describe("comparison view", () => {
  it("overlays two completed runs and tabulates their coefficients", async () => {
    const backend = new FakeBackend();
    backend.addCompletedRun(RUN_A);
    backend.addCompletedRun(RUN_B);
    const { app, root } = await boot(backend);

    (root.querySelector("#compare-a") as HTMLSelectElement).value = RUN_A;
    (root.querySelector("#compare-b") as HTMLSelectElement).value = RUN_B;
    await app.compareSelected();

    expect((root.querySelector("#compare-notice") as HTMLElement).hidden).toBe(true);
    expect(root.querySelectorAll("#compare-chart .fit-curve")).toHaveLength(4);
    expect(root.querySelectorAll("#compare-chart .fit-curve.run-b")).toHaveLength(2);
    expect(root.querySelectorAll("#compare-chart .xlabel")).toHaveLength(22);
    expect(root.querySelectorAll("#compare-table tbody tr")).toHaveLength(2);
    expect(root.querySelector("#compare-table thead")?.textContent).toContain("slope_f");
  });

  it("explains an axis mismatch instead of overlaying", async () => {
    const backend = new FakeBackend();
    backend.addCompletedRun(RUN_A);
    backend.addCompletedRun(RUN_B, ["x1", "x2", "x3", "x4"]);
    const { app, root } = await boot(backend);

    (root.querySelector("#compare-a") as HTMLSelectElement).value = RUN_A;
    (root.querySelector("#compare-b") as HTMLSelectElement).value = RUN_B;
    await app.compareSelected();

    const notice = root.querySelector("#compare-notice") as HTMLElement;
    expect(notice.hidden).toBe(false);
    expect(notice.textContent).toContain("different axes");
    expect(root.querySelectorAll("#compare-chart .fit-curve")).toHaveLength(0);
  });

  it("waits for a still-scoring run before overlaying", async () => {
    const backend = new FakeBackend();
    backend.addCompletedRun(RUN_A);
    backend.index.push({ run_id: RUN_B, state: "scoring", probes_done: 1, probes_total: 4 });
    backend.runs.set(RUN_B, {
      statusQueue: [
        { run_id: RUN_B, state: "scoring", probes_done: 2, probes_total: 4 },
        { run_id: RUN_B, state: "done", probes_done: 4, probes_total: 4 },
      ],
      series: seriesCsv(dateValues(), 0.2),
      fit: (degree) => fitFor(22, degree),
    });
    const { app, root } = await boot(backend);

    (root.querySelector("#compare-a") as HTMLSelectElement).value = RUN_A;
    (root.querySelector("#compare-b") as HTMLSelectElement).value = RUN_B;
    await app.compareSelected();

    expect(root.querySelectorAll("#compare-chart .fit-curve")).toHaveLength(4);
  });
});

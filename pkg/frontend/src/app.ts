/** Application wiring: the run form, run cards with live progress, and the
 * two-run comparison view. All statistics come from the service; the app
 * renders them. */

import { ApiClient, ApiError, FitSummary, RunStatus } from "./api.js";
import { ChartSeries, renderChart } from "./chart.js";
import { SeriesPoint, parseSeriesCsv } from "./csv.js";
import {
  MAX_DEGREE,
  RunFormState,
  buildRunConfig,
  defaultFormState,
  validateForm,
  axisCount,
} from "./form.js";
import { PollHandle, pollRun } from "./poll.js";

interface RunView {
  runId: string;
  status: RunStatus;
  card: HTMLElement;
  series: SeriesPoint[] | null;
  fit: FitSummary | null;
  /** server message when the run's statistics are degenerate */
  degenerate: string | null;
}

export interface AppOptions {
  api?: ApiClient;
  pollIntervalMs?: number;
}

const CATEGORIES = ["date", "place", "subreddit"];

function fmt(value: number | null): string {
  return value === null ? "n/a" : value.toFixed(3);
}

function shortId(runId: string): string {
  return runId.slice(0, 8);
}

export class App {
  private readonly api: ApiClient;
  private readonly pollIntervalMs: number;
  private readonly runs = new Map<string, RunView>();
  private readonly polls = new Map<string, PollHandle>();
  private readonly categorySizes = new Map<string, number>();

  constructor(
    private readonly root: HTMLElement,
    options: AppOptions = {},
  ) {
    this.api = options.api ?? new ApiClient();
    this.pollIntervalMs = options.pollIntervalMs ?? 400;
  }

  async init(): Promise<void> {
    this.renderSkeleton();
    this.bindEvents();
    await this.ensureCategorySize(this.readForm().category);
    this.updateFormValidity();
    await this.refreshRunIndex();
  }

  // ---------------------------------------------------------------- skeleton

  private renderSkeleton(): void {
    this.root.innerHTML = `
      <header class="masthead">
        <h1>biasprobe</h1>
        <p>Launch masked-gender probe runs and explore the fitted trends.</p>
      </header>
      <form id="run-form" autocomplete="off">
        <fieldset>
          <legend>scorer</legend>
          <label>backend
            <select id="scorer">
              <option value="synthetic" selected>synthetic (simulated corpus)</option>
              <option value="remote">remote fill-mask endpoint</option>
            </select>
          </label>
          <label class="remote-only" hidden>endpoint
            <input id="endpoint" type="url" placeholder="https://host/models/..." />
          </label>
          <label class="remote-only" hidden>mask token
            <input id="mask-token" type="text" placeholder="[MASK]" />
          </label>
        </fieldset>
        <fieldset>
          <legend>axis</legend>
          <label>mode
            <select id="axis-mode">
              <option value="category" selected>built-in category</option>
              <option value="custom">custom values</option>
            </select>
          </label>
          <label class="category-only">category
            <select id="category">
              ${CATEGORIES.map((c) => `<option value="${c}">${c}</option>`).join("")}
            </select>
          </label>
          <label class="custom-only" hidden>values (one per line)
            <textarea id="axis-text" rows="5"></textarea>
          </label>
        </fieldset>
        <fieldset>
          <legend>probes and fit</legend>
          <label>template patterns (one per line)
            <textarea id="template-text" rows="3"></textarea>
          </label>
          <label>top-k <input id="k" type="text" inputmode="numeric" placeholder="default" /></label>
          <label>fit degree <select id="fit-degree"></select></label>
          <label>seed <input id="seed" type="text" inputmode="numeric" /></label>
        </fieldset>
        <button id="submit" type="button">run</button>
        <ul id="form-problems"></ul>
        <p id="submit-error" class="error" hidden></p>
      </form>
      <section id="runs"><h2>runs</h2></section>
      <section id="compare">
        <h2>compare</h2>
        <label>run A <select id="compare-a"></select></label>
        <label>run B <select id="compare-b"></select></label>
        <button id="compare-btn" type="button">overlay</button>
        <p id="compare-notice" hidden></p>
        <div id="compare-table"></div>
        <div id="compare-chart"></div>
      </section>
    `;
    const defaults = defaultFormState();
    this.input("template-text").value = defaults.templateText;
    this.input("seed").value = defaults.seed;
    const degree = this.select("fit-degree");
    for (let d = 1; d <= MAX_DEGREE; d++) {
      const option = document.createElement("option");
      option.value = String(d);
      option.textContent = String(d);
      degree.appendChild(option);
    }
    degree.value = String(defaults.fitDegree);
  }

  private bindEvents(): void {
    const form = this.element("run-form");
    form.addEventListener("input", () => this.updateFormValidity());
    form.addEventListener("change", () => {
      const state = this.readForm();
      this.element("endpoint").closest("label")!.hidden = state.scorer !== "remote";
      this.element("mask-token").closest("label")!.hidden = state.scorer !== "remote";
      this.element("category").closest("label")!.hidden = state.axisMode !== "category";
      this.element("axis-text").closest("label")!.hidden = state.axisMode !== "custom";
      if (state.axisMode === "category") {
        void this.ensureCategorySize(state.category).then(() => this.updateFormValidity());
      }
      this.updateFormValidity();
    });
    this.element("submit").addEventListener("click", () => {
      void this.submitRun().catch(() => undefined);
    });
    this.element("compare-btn").addEventListener("click", () => {
      void this.compareSelected().catch(() => undefined);
    });
  }

  // -------------------------------------------------------------- form state

  private element(id: string): HTMLElement {
    const node = this.root.querySelector(`#${id}`);
    if (!node) {
      throw new Error(`missing element #${id}`);
    }
    return node as HTMLElement;
  }

  private input(id: string): HTMLInputElement | HTMLTextAreaElement {
    return this.element(id) as HTMLInputElement | HTMLTextAreaElement;
  }

  private select(id: string): HTMLSelectElement {
    return this.element(id) as HTMLSelectElement;
  }

  readForm(): RunFormState {
    return {
      scorer: this.select("scorer").value as RunFormState["scorer"],
      endpoint: this.input("endpoint").value,
      maskToken: this.input("mask-token").value,
      axisMode: this.select("axis-mode").value as RunFormState["axisMode"],
      category: this.select("category").value,
      axisText: this.input("axis-text").value,
      templateText: this.input("template-text").value,
      k: this.input("k").value,
      fitDegree: parseInt(this.select("fit-degree").value, 10),
      seed: this.input("seed").value,
    };
  }

  private async ensureCategorySize(category: string): Promise<void> {
    if (this.categorySizes.has(category)) {
      return;
    }
    try {
      const axis = await this.api.axis(category);
      this.categorySizes.set(category, axis.values.length);
    } catch {
      // leave unknown; validation treats the size as 0 until it loads
    }
  }

  updateFormValidity(): string[] {
    const state = this.readForm();
    const size = axisCount(state, this.categorySizes.get(state.category) ?? null);

    // degrees whose precondition the current axis cannot meet are hidden
    for (const option of Array.from(this.select("fit-degree").options)) {
      const d = parseInt(option.value, 10);
      const allowed = size >= d + 2;
      option.disabled = !allowed;
      option.hidden = !allowed && d > 2;
    }

    const problems = validateForm(state, size);
    const list = this.element("form-problems");
    list.innerHTML = "";
    for (const problem of problems) {
      const item = document.createElement("li");
      item.textContent = problem;
      list.appendChild(item);
    }
    (this.element("submit") as HTMLButtonElement).disabled = problems.length > 0;
    return problems;
  }

  // --------------------------------------------------------------- run cards

  private runCard(runId: string): RunView {
    const existing = this.runs.get(runId);
    if (existing) {
      return existing;
    }
    const card = document.createElement("article");
    card.className = "run-card";
    card.dataset.runId = runId;
    card.innerHTML = `
      <header>
        <code class="run-id">${shortId(runId)}</code>
        <span class="run-state">queued</span>
      </header>
      <progress class="run-progress" max="1" value="0"></progress>
      <p class="run-error error" hidden></p>
      <p class="degenerate-flag" hidden></p>
      <dl class="coef-card" hidden>
        <dt>slope (f)</dt><dd class="coef" data-coef="slope_f"></dd>
        <dt>r (f)</dt><dd class="coef" data-coef="r_f"></dd>
        <dt>slope (m)</dt><dd class="coef" data-coef="slope_m"></dd>
        <dt>r (m)</dt><dd class="coef" data-coef="r_m"></dd>
      </dl>
      <label class="degree-row" hidden>plot degree
        <select class="degree-select">
          ${Array.from({ length: MAX_DEGREE }, (_, i) => `<option>${i + 1}</option>`).join("")}
        </select>
      </label>
      <div class="chart-host"></div>
    `;
    card.querySelector(".degree-select")!.addEventListener("change", (event) => {
      const degree = parseInt((event.target as HTMLSelectElement).value, 10);
      void this.changeDegree(runId, degree).catch(() => undefined);
    });
    this.element("runs").appendChild(card);
    const view: RunView = {
      runId,
      status: {
        run_id: runId,
        state: "queued",
        probes_done: 0,
        probes_total: 0,
      },
      card,
      series: null,
      fit: null,
      degenerate: null,
    };
    this.runs.set(runId, view);
    return view;
  }

  private showStatus(view: RunView, status: RunStatus): void {
    view.status = status;
    view.card.querySelector(".run-state")!.textContent = status.state;
    const progress = view.card.querySelector(".run-progress") as HTMLProgressElement;
    progress.max = Math.max(1, status.probes_total);
    progress.value = status.probes_done;
    if (status.state === "failed") {
      const line = view.card.querySelector(".run-error") as HTMLElement;
      const hint = status.retriable ? " (retriable: resubmitting may succeed)" : "";
      line.textContent = `${status.error ?? "run failed"}${hint}`;
      line.hidden = false;
    }
  }

  async submitRun(): Promise<RunView | null> {
    const problems = this.updateFormValidity();
    if (problems.length > 0) {
      return null;
    }
    const errorLine = this.element("submit-error");
    errorLine.hidden = true;
    const config = buildRunConfig(this.readForm());
    let runId: string;
    try {
      const submitted = await this.api.submitRun(config);
      runId = submitted.run_id;
    } catch (err) {
      errorLine.textContent = err instanceof Error ? err.message : String(err);
      errorLine.hidden = false;
      throw err;
    }
    const view = this.runCard(runId);
    const status = await this.watch(runId);
    if (status.state === "done") {
      await this.loadArtifacts(view);
      this.renderRunView(view);
    }
    await this.refreshRunIndex();
    return view;
  }

  /** Poll a run to a terminal state; at most one loop per run. */
  private watch(runId: string): Promise<RunStatus> {
    const view = this.runCard(runId);
    const existing = this.polls.get(runId);
    if (existing) {
      return existing.done;
    }
    const handle = pollRun(
      this.api,
      runId,
      (status) => this.showStatus(view, status),
      this.pollIntervalMs,
    );
    this.polls.set(runId, handle);
    return handle.done.finally(() => this.polls.delete(runId));
  }

  private async loadArtifacts(view: RunView): Promise<void> {
    view.series = parseSeriesCsv(await this.api.series(view.runId));
    try {
      view.fit = await this.api.fit(view.runId);
      view.degenerate = null;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        view.fit = null;
        view.degenerate = err.message;
      } else {
        throw err;
      }
    }
  }

  private renderRunView(view: RunView): void {
    if (!view.series) {
      return;
    }
    const flag = view.card.querySelector(".degenerate-flag") as HTMLElement;
    flag.hidden = view.degenerate === null;
    flag.textContent = view.degenerate ?? "";

    const coefCard = view.card.querySelector(".coef-card") as HTMLElement;
    if (view.fit) {
      coefCard.hidden = false;
      const cells: Record<string, string> = {
        slope_f: fmt(view.fit.slope_female),
        r_f: fmt(view.fit.pearson_female),
        slope_m: fmt(view.fit.slope_male),
        r_m: fmt(view.fit.pearson_male),
      };
      for (const [key, text] of Object.entries(cells)) {
        view.card.querySelector(`[data-coef="${key}"]`)!.textContent = text;
      }
      const degreeRow = view.card.querySelector(".degree-row") as HTMLElement;
      degreeRow.hidden = false;
      (view.card.querySelector(".degree-select") as HTMLSelectElement).value = String(
        view.fit.degree,
      );
    } else {
      coefCard.hidden = true;
    }

    const host = view.card.querySelector(".chart-host") as HTMLElement;
    host.innerHTML = "";
    host.appendChild(
      renderChart([
        { label: shortId(view.runId), points: view.series, fit: view.fit, variant: "a" },
      ]),
    );
  }

  /** Re-fit the stored series at another degree; never re-scores. */
  async changeDegree(runId: string, degree: number): Promise<void> {
    const view = this.runs.get(runId);
    if (!view || !view.series) {
      return;
    }
    try {
      view.fit = await this.api.fit(runId, degree);
      view.degenerate = null;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        view.fit = null;
        view.degenerate = err.message;
      } else {
        throw err;
      }
    }
    this.renderRunView(view);
  }

  // --------------------------------------------------------------- run index

  async refreshRunIndex(): Promise<void> {
    const index = await this.api.runIndex();
    for (const id of ["compare-a", "compare-b"]) {
      const select = this.select(id);
      const previous = select.value;
      select.innerHTML = "";
      for (const status of index) {
        const option = document.createElement("option");
        option.value = status.run_id;
        option.textContent = `${shortId(status.run_id)} (${status.state})`;
        select.appendChild(option);
      }
      if (previous && index.some((s) => s.run_id === previous)) {
        select.value = previous;
      }
    }
  }

  // --------------------------------------------------------------- compare

  async compareSelected(): Promise<void> {
    const notice = this.element("compare-notice");
    const tableHost = this.element("compare-table");
    const chartHost = this.element("compare-chart");
    notice.hidden = true;
    tableHost.innerHTML = "";
    chartHost.innerHTML = "";

    const aId = this.select("compare-a").value;
    const bId = this.select("compare-b").value;
    if (!aId || !bId || aId === bId) {
      notice.textContent = "pick two different runs to compare";
      notice.hidden = false;
      return;
    }

    // wait for both to finish so the overlay always shows final series
    const statuses = await Promise.all([this.watch(aId), this.watch(bId)]);
    const failed = statuses.find((s) => s.state === "failed");
    if (failed) {
      notice.textContent = `run ${shortId(failed.run_id)} failed: ${failed.error ?? "unknown"}`;
      notice.hidden = false;
      return;
    }

    const views = [this.runCard(aId), this.runCard(bId)];
    for (const view of views) {
      if (!view.series) {
        await this.loadArtifacts(view);
      }
    }
    const [a, b] = views;
    const sameAxis =
      a.series!.length === b.series!.length &&
      a.series!.every((p, i) => p.wValue === b.series![i].wValue);
    if (!sameAxis) {
      notice.textContent =
        "these runs use different axes, so their series cannot share one chart";
      notice.hidden = false;
      return;
    }

    const table = document.createElement("table");
    table.innerHTML = `
      <thead><tr><th>run</th><th>slope_f</th><th>r_f</th><th>slope_m</th><th>r_m</th></tr></thead>
    `;
    const body = document.createElement("tbody");
    for (const view of views) {
      const row = document.createElement("tr");
      const cells = view.fit
        ? [
            fmt(view.fit.slope_female),
            fmt(view.fit.pearson_female),
            fmt(view.fit.slope_male),
            fmt(view.fit.pearson_male),
          ]
        : ["n/a", "n/a", "n/a", "n/a"];
      row.innerHTML = `<td>${shortId(view.runId)}</td>${cells
        .map((c) => `<td>${c}</td>`)
        .join("")}`;
      body.appendChild(row);
    }
    table.appendChild(body);
    tableHost.appendChild(table);

    const overlay: ChartSeries[] = [
      { label: shortId(aId), points: a.series!, fit: a.fit, variant: "a" },
      { label: shortId(bId), points: b.series!, fit: b.fit, variant: "b" },
    ];
    chartHost.appendChild(renderChart(overlay));
  }
}

export function createApp(root: HTMLElement, options: AppOptions = {}): App {
  return new App(root, options);
}

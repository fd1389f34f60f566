/** SVG chart rendering: gendered mass scatter, server-fitted curves, and
 * confidence bands. Fit coefficients and band edges come from the service;
 * this module only maps them to pixels. */

import type { FitSummary } from "./api.js";
import type { SeriesPoint } from "./csv.js";

export interface ChartSeries {
  label: string;
  points: SeriesPoint[];
  fit: FitSummary | null;
  /** styling variant so overlaid runs stay distinguishable */
  variant: "a" | "b";
}

const SVG_NS = "http://www.w3.org/2000/svg";

const WIDTH = 760;
const HEIGHT = 430;
const MARGIN = { top: 18, right: 16, bottom: 86, left: 56 };
const CURVE_SAMPLES = 120;

function el<K extends keyof SVGElementTagNameMap>(
  name: K,
  attrs: Record<string, string> = {},
): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, name);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  return node;
}

function polyval(coeffs: number[], x: number): number {
  let acc = 0;
  for (let j = coeffs.length - 1; j >= 0; j--) {
    acc = acc * x + coeffs[j];
  }
  return acc;
}

interface Scale {
  x(frac: number): number;
  y(value: number): number;
}

function yDomain(series: ChartSeries[]): [number, number] {
  let lo = 0;
  let hi = 0.05;
  for (const run of series) {
    for (const p of run.points) {
      hi = Math.max(hi, p.meanFemale, p.meanMale);
      lo = Math.min(lo, p.meanFemale, p.meanMale);
    }
    if (run.fit) {
      for (const band of run.fit.ci) {
        hi = Math.max(hi, band.upper_f, band.upper_m);
        lo = Math.min(lo, band.lower_f, band.lower_m);
      }
    }
  }
  const pad = (hi - lo) * 0.08;
  return [Math.min(0, lo - pad), hi + pad];
}

function bandPath(
  ci: FitSummary["ci"],
  lower: (p: FitSummary["ci"][number]) => number,
  upper: (p: FitSummary["ci"][number]) => number,
  scale: Scale,
): string {
  const forward = ci.map((p, i) => `${i === 0 ? "M" : "L"}${scale.x(p.x)},${scale.y(upper(p))}`);
  const back = [...ci]
    .reverse()
    .map((p) => `L${scale.x(p.x)},${scale.y(lower(p))}`);
  return `${forward.join("")}${back.join("")}Z`;
}

function curvePath(coeffs: number[], scale: Scale): string {
  const parts: string[] = [];
  for (let i = 0; i <= CURVE_SAMPLES; i++) {
    const frac = i / CURVE_SAMPLES;
    parts.push(`${i === 0 ? "M" : "L"}${scale.x(frac)},${scale.y(polyval(coeffs, frac))}`);
  }
  return parts.join("");
}

/** Render one or more runs into a fresh <svg>. Callers guarantee every run
 * shares the axis of series[0]; degenerate runs pass fit = null and get a
 * scatter with no curves or bands. */
export function renderChart(series: ChartSeries[]): SVGSVGElement {
  if (series.length === 0 || series[0].points.length === 0) {
    throw new Error("chart needs at least one non-empty series");
  }
  const axis = series[0].points;
  const n = axis.length;
  const [yLo, yHi] = yDomain(series);
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const scale: Scale = {
    x: (frac) => MARGIN.left + frac * plotW,
    y: (value) => MARGIN.top + (1 - (value - yLo) / (yHi - yLo)) * plotH,
  };

  const svg = el("svg", {
    viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    width: String(WIDTH),
    height: String(HEIGHT),
    class: "mass-chart",
    role: "img",
  });

  // horizontal grid with y tick labels
  const ticks = 5;
  for (let t = 0; t <= ticks; t++) {
    const value = yLo + ((yHi - yLo) * t) / ticks;
    const y = scale.y(value);
    svg.appendChild(
      el("line", {
        x1: String(MARGIN.left),
        x2: String(WIDTH - MARGIN.right),
        y1: String(y),
        y2: String(y),
        class: "grid",
      }),
    );
    const label = el("text", {
      x: String(MARGIN.left - 8),
      y: String(y + 4),
      class: "ylabel",
      "text-anchor": "end",
    });
    label.textContent = value.toFixed(2);
    svg.appendChild(label);
  }

  // one x label per axis position, rotated when crowded
  const rotate = n > 12;
  axis.forEach((point, i) => {
    const x = scale.x(n === 1 ? 0 : i / (n - 1));
    const y = HEIGHT - MARGIN.bottom + 16;
    const attrs: Record<string, string> = {
      x: String(x),
      y: String(y),
      class: "xlabel",
      "text-anchor": rotate ? "end" : "middle",
    };
    if (rotate) {
      attrs.transform = `rotate(-55 ${x} ${y})`;
    }
    const label = el("text", attrs);
    label.textContent = point.wValue;
    svg.appendChild(label);
  });

  for (const run of series) {
    const suffix = ` run-${run.variant}`;
    if (run.fit && run.fit.ci.length > 1) {
      svg.appendChild(
        el("path", {
          d: bandPath(run.fit.ci, (p) => p.lower_f, (p) => p.upper_f, scale),
          class: `ci-band female${suffix}`,
        }),
      );
      svg.appendChild(
        el("path", {
          d: bandPath(run.fit.ci, (p) => p.lower_m, (p) => p.upper_m, scale),
          class: `ci-band male${suffix}`,
        }),
      );
    }
    if (run.fit) {
      svg.appendChild(
        el("path", {
          d: curvePath(run.fit.coeffs_female, scale),
          class: `fit-curve female${suffix}`,
        }),
      );
      svg.appendChild(
        el("path", {
          d: curvePath(run.fit.coeffs_male, scale),
          class: `fit-curve male${suffix}`,
        }),
      );
    }
    run.points.forEach((point, i) => {
      const x = n === 1 ? scale.x(0) : scale.x(i / (n - 1));
      for (const [gender, value] of [
        ["female", point.meanFemale],
        ["male", point.meanMale],
      ] as const) {
        const dot = el("circle", {
          cx: String(x),
          cy: String(scale.y(value)),
          r: "3.2",
          class: `pt ${gender}${suffix}`,
        });
        const title = el("title");
        title.textContent = `${run.label} ${point.wValue} ${gender}: ${value.toFixed(4)}`;
        dot.appendChild(title);
        svg.appendChild(dot);
      }
    });
  }

  return svg;
}

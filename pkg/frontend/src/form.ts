/** Run form state, validation, and the config payload it submits.
 *
 * Validation mirrors the server's preconditions so invalid forms never
 * reach the network: every template pattern uses {mask} and {w} exactly
 * once, a custom axis needs at least 4 values, and a degree-d fit needs
 * d + 2 axis positions.
 */

export type ScorerChoice = "synthetic" | "remote";
export type AxisMode = "category" | "custom";

export interface RunFormState {
  scorer: ScorerChoice;
  endpoint: string;
  maskToken: string;
  axisMode: AxisMode;
  category: string;
  axisText: string;
  templateText: string;
  k: string;
  fitDegree: number;
  seed: string;
}

export const MIN_CUSTOM_AXIS = 4;
export const MAX_DEGREE = 5;

export function defaultFormState(): RunFormState {
  return {
    scorer: "synthetic",
    endpoint: "",
    maskToken: "",
    axisMode: "category",
    category: "date",
    axisText: "",
    templateText: "{mask} was a {life_stage} in {w}.",
    k: "",
    fitDegree: 1,
    seed: "7",
  };
}

export function lines(text: string): string[] {
  return text
    .split(/\r?\n/)
    .map((line) => line.trim())
    .filter((line) => line.length > 0);
}

function countToken(pattern: string, token: string): number {
  let count = 0;
  let at = pattern.indexOf(token);
  while (at !== -1) {
    count++;
    at = pattern.indexOf(token, at + token.length);
  }
  return count;
}

/** Axis size the form is about to submit: fetched category size, or the
 * number of custom lines. */
export function axisCount(state: RunFormState, categorySize: number | null): number {
  if (state.axisMode === "custom") {
    return lines(state.axisText).length;
  }
  return categorySize ?? 0;
}

export function validateForm(state: RunFormState, axisSize: number): string[] {
  const problems: string[] = [];

  const patterns = lines(state.templateText);
  if (patterns.length === 0) {
    problems.push("at least one template pattern is required");
  }
  patterns.forEach((pattern, i) => {
    if (countToken(pattern, "{mask}") !== 1) {
      problems.push(`pattern ${i + 1} must contain {mask} exactly once`);
    }
    if (countToken(pattern, "{w}") !== 1) {
      problems.push(`pattern ${i + 1} must contain {w} exactly once`);
    }
  });

  if (state.axisMode === "custom" && lines(state.axisText).length < MIN_CUSTOM_AXIS) {
    problems.push(`a custom axis needs at least ${MIN_CUSTOM_AXIS} values`);
  }
  if (!Number.isInteger(state.fitDegree) || state.fitDegree < 1 || state.fitDegree > MAX_DEGREE) {
    problems.push(`fit degree must lie in [1, ${MAX_DEGREE}]`);
  } else if (axisSize < state.fitDegree + 2) {
    problems.push(
      `a degree-${state.fitDegree} fit needs at least ${state.fitDegree + 2} axis values`,
    );
  }

  if (state.scorer === "remote" && state.endpoint.trim() === "") {
    problems.push("the remote scorer needs an endpoint URL");
  }
  if (state.k.trim() !== "" && !/^[1-9]\d*$/.test(state.k.trim())) {
    problems.push("k must be a positive integer");
  }
  if (!/^-?\d+$/.test(state.seed.trim())) {
    problems.push("seed must be an integer");
  }
  return problems;
}

/** The JSON body for POST /api/runs. Call only on a validated state. */
export function buildRunConfig(state: RunFormState): Record<string, unknown> {
  let scorer: Record<string, unknown>;
  if (state.scorer === "remote") {
    scorer = { type: "remote", endpoint: state.endpoint.trim() };
    if (state.maskToken.trim() !== "") {
      scorer.mask_token = state.maskToken.trim();
    }
  } else {
    scorer = { type: "synthetic" };
  }

  const config: Record<string, unknown> = {
    scorer,
    fit_degree: state.fitDegree,
    seed: parseInt(state.seed.trim(), 10),
    template_patterns: lines(state.templateText),
  };
  if (state.axisMode === "custom") {
    config.axis_values = lines(state.axisText);
  } else {
    config.category = state.category;
  }
  if (state.k.trim() !== "") {
    config.k = parseInt(state.k.trim(), 10);
  }
  return config;
}

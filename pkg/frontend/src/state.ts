/** Pure query-console state: no DOM, no fetch, fully unit-testable. */

export type Method = "semantic" | "lcs";

export interface Hit {
  id: string;
  latex: string;
  score: number;
  label: string;
}

export interface PanelState {
  method: Method;
  /** Sequence number of the most recently issued request. */
  seq: number;
  loading: boolean;
  /** Last successfully applied hits; preserved across later errors. */
  hits: Hit[];
  elapsedMs: number | null;
  error: string | null;
  /** True once any query has succeeded (distinguishes "no hits" from "never ran"). */
  hasResults: boolean;
}

export const K_MIN = 1;
export const K_MAX = 50;
export const K_DEFAULT = 5;

export function initialPanel(method: Method = "semantic"): PanelState {
  return {
    method,
    seq: 0,
    loading: false,
    hits: [],
    elapsedMs: null,
    error: null,
    hasResults: false,
  };
}

/** Clamp a raw k input to [K_MIN, K_MAX]; non-numeric falls back to the default. */
export function clampK(raw: unknown): number {
  if (typeof raw === "string" && raw.trim() === "") {
    return K_DEFAULT;
  }
  const n = Math.trunc(Number(raw));
  if (!Number.isFinite(n)) {
    return K_DEFAULT;
  }
  return Math.min(K_MAX, Math.max(K_MIN, n));
}

/** Issue a new request: bumps seq, enters loading, keeps previous hits visible. */
export function beginQuery(panel: PanelState): PanelState {
  return { ...panel, seq: panel.seq + 1, loading: true, error: null };
}

/** Apply a response for request `seq`; responses for superseded requests are discarded. */
export function applySuccess(
  panel: PanelState,
  seq: number,
  hits: Hit[],
  elapsedMs: number,
): PanelState {
  if (seq !== panel.seq) {
    return panel;
  }
  return { ...panel, loading: false, hits, elapsedMs, error: null, hasResults: true };
}

/** Apply a failure for request `seq`; previous hits stay on screen, stale errors are discarded. */
export function applyError(panel: PanelState, seq: number, message: string): PanelState {
  if (seq !== panel.seq) {
    return panel;
  }
  return { ...panel, loading: false, error: message };
}

export function setMethod(panel: PanelState, method: Method): PanelState {
  if (method === panel.method) {
    return panel;
  }
  return { ...panel, method };
}

/** Two independent panels for the side-by-side compare view. */
export interface CompareState {
  semantic: PanelState;
  lcs: PanelState;
}

export function initialCompare(): CompareState {
  return { semantic: initialPanel("semantic"), lcs: initialPanel("lcs") };
}

/** Distance reads as a decimal; LCS score is a match length. */
export function formatScore(method: Method, score: number): string {
  if (method === "semantic") {
    return `distance ${score.toFixed(4)}`;
  }
  return Number.isInteger(score) ? `lcs ${score}` : `lcs ${score.toFixed(3)}`;
}

/** Human-readable message from an HTTP error payload (422 encode errors, validation lists). */
export function errorMessage(status: number, body: unknown): string {
  const detail = (body as { detail?: unknown } | null)?.detail;
  if (typeof detail === "string") {
    return detail;
  }
  if (Array.isArray(detail)) {
    const parts = detail
      .map((item) => (item && typeof item === "object" ? (item as { msg?: string }).msg : null))
      .filter((msg): msg is string => typeof msg === "string");
    if (parts.length > 0) {
      return parts.join("; ");
    }
  }
  if (detail && typeof detail === "object") {
    const d = detail as { error?: string; position?: number };
    if (typeof d.error === "string") {
      return typeof d.position === "number" ? `${d.error} (position ${d.position})` : d.error;
    }
  }
  return `request failed with status ${status}`;
}

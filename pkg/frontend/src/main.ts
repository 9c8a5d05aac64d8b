import { ApiError, queryApi } from "./api";
import { renderPanel } from "./render";
import {
  applyError,
  applySuccess,
  beginQuery,
  clampK,
  CompareState,
  initialCompare,
  initialPanel,
  Method,
  PanelState,
  setMethod,
} from "./state";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

const form = byId<HTMLFormElement>("query-form");
const latexInput = byId<HTMLInputElement>("latex-input");
const kInput = byId<HTMLInputElement>("k-input");
const methodSelect = byId<HTMLSelectElement>("method-select");
const excludeSelfInput = byId<HTMLInputElement>("exclude-self");
const compareToggle = byId<HTMLInputElement>("compare-toggle");
const singleSection = byId<HTMLElement>("single-view");
const compareSection = byId<HTMLElement>("compare-view");
const singlePanelEl = byId<HTMLElement>("panel-single");
const semanticPanelEl = byId<HTMLElement>("panel-semantic");
const lcsPanelEl = byId<HTMLElement>("panel-lcs");

let single: PanelState = initialPanel(methodSelect.value as Method);
let compare: CompareState = initialCompare();

function redraw(): void {
  const comparing = compareToggle.checked;
  singleSection.hidden = comparing;
  compareSection.hidden = !comparing;
  methodSelect.disabled = comparing;
  renderPanel(singlePanelEl, single);
  renderPanel(semanticPanelEl, compare.semantic);
  renderPanel(lcsPanelEl, compare.lcs);
}

async function runPanel(
  panel: PanelState,
  commit: (next: PanelState) => void,
  latex: string,
  k: number,
  excludeSelf: boolean,
): Promise<void> {
  const started = beginQuery(panel);
  commit(started);
  redraw();
  const seq = started.seq;
  try {
    const res = await queryApi(latex, k, started.method, excludeSelf);
    commit(applySuccess(currentOf(commit), seq, res.hits, res.elapsed_ms));
  } catch (err) {
    const message = err instanceof ApiError ? err.message : String(err);
    commit(applyError(currentOf(commit), seq, message));
  }
  redraw();
}

// Resolve the live panel for a commit function so stale-response checks compare
// against the latest state, not the state captured when the request began.
const commitSingle = (next: PanelState): void => {
  single = next;
};
const commitSemantic = (next: PanelState): void => {
  compare = { ...compare, semantic: next };
};
const commitLcs = (next: PanelState): void => {
  compare = { ...compare, lcs: next };
};

function currentOf(commit: (next: PanelState) => void): PanelState {
  if (commit === commitSemantic) {
    return compare.semantic;
  }
  if (commit === commitLcs) {
    return compare.lcs;
  }
  return single;
}

form.addEventListener("submit", (event) => {
  event.preventDefault();
  const latex = latexInput.value.trim();
  if (!latex) {
    single = applyError(beginQuery(single), single.seq + 1, "enter a LaTeX expression");
    redraw();
    return;
  }
  const k = clampK(kInput.value);
  kInput.value = String(k);
  const excludeSelf = excludeSelfInput.checked;
  if (compareToggle.checked) {
    void runPanel(compare.semantic, commitSemantic, latex, k, excludeSelf);
    void runPanel(compare.lcs, commitLcs, latex, k, excludeSelf);
  } else {
    single = setMethod(single, methodSelect.value as Method);
    void runPanel(single, commitSingle, latex, k, excludeSelf);
  }
});

methodSelect.addEventListener("change", () => {
  single = setMethod(single, methodSelect.value as Method);
  redraw();
});

compareToggle.addEventListener("change", redraw);

redraw();

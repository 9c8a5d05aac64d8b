/** DOM rendering for result panels. */

import katex from "katex";

import { formatScore, PanelState } from "./state";

/** Render LaTeX into `target`; on any KaTeX failure fall back to the raw source. */
export function renderMath(target: HTMLElement, latex: string): void {
  try {
    katex.render(latex, target, { throwOnError: true, displayMode: false });
  } catch {
    target.textContent = "";
    const raw = document.createElement("code");
    raw.className = "raw-latex";
    raw.textContent = latex;
    target.appendChild(raw);
  }
}

export function renderPanel(container: HTMLElement, panel: PanelState): void {
  container.textContent = "";
  container.classList.toggle("loading", panel.loading);

  if (panel.error !== null) {
    const err = document.createElement("p");
    err.className = "error";
    err.setAttribute("role", "alert");
    err.textContent = panel.error;
    container.appendChild(err);
  }

  if (panel.hasResults) {
    const meta = document.createElement("p");
    meta.className = "meta";
    const count = `${panel.hits.length} result${panel.hits.length === 1 ? "" : "s"}`;
    const timing = panel.elapsedMs !== null ? ` in ${panel.elapsedMs.toFixed(1)} ms` : "";
    meta.textContent = `${panel.method}: ${count}${timing}`;
    container.appendChild(meta);
  }

  const list = document.createElement("ol");
  list.className = "results";
  for (const hit of panel.hits) {
    const card = document.createElement("li");
    card.className = "card";

    const math = document.createElement("div");
    math.className = "math";
    renderMath(math, hit.latex);
    card.appendChild(math);

    const footer = document.createElement("div");
    footer.className = "card-footer";

    const badge = document.createElement("span");
    badge.className = `badge badge-${hit.label.toLowerCase()}`;
    badge.textContent = hit.label.toLowerCase();
    footer.appendChild(badge);

    const score = document.createElement("span");
    score.className = "score";
    score.textContent = formatScore(panel.method, hit.score);
    footer.appendChild(score);

    const id = document.createElement("span");
    id.className = "expr-id";
    id.textContent = hit.id;
    footer.appendChild(id);

    card.appendChild(footer);
    list.appendChild(card);
  }
  container.appendChild(list);

  if (panel.hasResults && panel.hits.length === 0 && panel.error === null) {
    const empty = document.createElement("p");
    empty.className = "meta";
    empty.textContent = "No matches.";
    container.appendChild(empty);
  }
}

/** Ranked evidence-window list with top-k truncation. */

import type { QueryResult } from "../api.js";

export const DEFAULT_TOP_K = 10;

export function renderWindowList(
  container: HTMLElement,
  result: QueryResult,
  selected: number,
  onSelect: (index: number) => void,
  topK: number = DEFAULT_TOP_K,
): void {
  container.textContent = "";
  container.classList.add("window-list");

  if (result.windows.length === 0) {
    const empty = document.createElement("p");
    empty.className = "no-windows";
    empty.textContent = "No evidence windows matched this query.";
    container.appendChild(empty);
    return;
  }

  const list = document.createElement("ol");
  result.windows.slice(0, topK).forEach((w, i) => {
    const item = document.createElement("li");
    item.className = "window-item" + (i === selected ? " selected" : "");
    item.dataset.index = String(i);
    const kpis = [...new Set(w.matchedAtoms.map((a) => a.kpi))].join(", ");
    item.innerHTML =
      `<span class="window-range">frames ${w.startFrame}–${w.endFrame}</span>` +
      `<span class="window-score">score ${w.score.toPrecision(3)}</span>` +
      `<span class="window-kpis">${kpis}</span>`;
    item.addEventListener("click", () => onSelect(i));
    list.appendChild(item);
  });
  container.appendChild(list);

  if (result.windows.length > topK) {
    const note = document.createElement("p");
    note.className = "truncation-note";
    note.textContent = `Showing the top ${topK} of ${result.windows.length} windows.`;
    container.appendChild(note);
  }
}

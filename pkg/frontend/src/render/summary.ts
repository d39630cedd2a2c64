/** Per-KPI aggregate statistics table for a query result. */

import type { QueryResult } from "../api.js";

export function renderSummary(container: HTMLElement, result: QueryResult): void {
  container.textContent = "";
  container.classList.add("summary");

  const headline = document.createElement("p");
  headline.className = "summary-headline";
  headline.textContent = `${result.totalWindows} evidence window(s) · bandwidth ${result.bandwidth} · delta ${result.delta} · alpha ${result.alpha}`;
  container.appendChild(headline);

  const table = document.createElement("table");
  table.className = "summary-table";
  table.innerHTML =
    "<thead><tr><th>KPI</th><th>windows</th><th>mean |tau|</th><th>mean score</th><th>strongest</th></tr></thead>";
  const body = document.createElement("tbody");
  for (const [name, s] of result.perKpi.entries()) {
    const row = document.createElement("tr");
    row.dataset.kpi = name;
    row.innerHTML =
      `<td>${name}</td><td>${s.windows}</td>` +
      `<td>${s.meanAbsTau.toPrecision(4)}</td>` +
      `<td>${s.meanScore.toPrecision(4)}</td>` +
      `<td>${s.strongestWindow === null ? "—" : `window ${s.strongestWindow}`}</td>`;
    body.appendChild(row);
  }
  table.appendChild(body);
  container.appendChild(table);
}

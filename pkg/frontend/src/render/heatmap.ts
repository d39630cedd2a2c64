/** Color-scaled error-rate grid, optionally over a representative frame. */

import type { HeatmapPayload } from "../api.js";

export function renderHeatmap(
  container: HTMLElement,
  heatmap: HeatmapPayload,
  backgroundUrl: string | null = null,
): void {
  container.textContent = "";
  container.classList.add("heatmap");

  const wrap = document.createElement("div");
  wrap.className = "heatmap-wrap";
  if (backgroundUrl) {
    const img = document.createElement("img");
    img.className = "heatmap-background";
    img.src = backgroundUrl;
    img.alt = "representative frame";
    wrap.appendChild(img);
  }

  const grid = document.createElement("div");
  grid.className = "heatmap-grid";
  grid.style.gridTemplateColumns = `repeat(${heatmap.gridCols}, 1fr)`;
  grid.dataset.kind = heatmap.kind;

  const flat = heatmap.cells.flat();
  const max = Math.max(...flat);
  for (let r = 0; r < heatmap.gridRows; r++) {
    for (let c = 0; c < heatmap.gridCols; c++) {
      const value = heatmap.cells[r][c];
      const cell = document.createElement("div");
      cell.className = "heatmap-cell";
      cell.dataset.row = String(r);
      cell.dataset.col = String(c);
      cell.dataset.value = String(value);
      const intensity = max > 0 ? value / max : 0;
      cell.style.backgroundColor =
        heatmap.kind === "overcount"
          ? `rgba(214, 69, 51, ${(0.08 + 0.8 * intensity).toFixed(3)})`
          : `rgba(51, 105, 214, ${(0.08 + 0.8 * intensity).toFixed(3)})`;
      cell.title = `cell (${r}, ${c}): ${value.toPrecision(3)} per frame`;
      grid.appendChild(cell);
    }
  }
  wrap.appendChild(grid);
  container.appendChild(wrap);

  const caption = document.createElement("div");
  caption.className = "heatmap-caption";
  caption.textContent = `${heatmap.kind} rate per frame (max ${max.toPrecision(3)})`;
  container.appendChild(caption);
}

import { ApiClient } from "./api.js";
import { AppElements, ExplorerApp } from "./app.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const elements: AppElements = {
  projectSelect: el("project-select"),
  queryInput: el("query-input"),
  runButton: el("run-button"),
  errorPanel: el("error-panel"),
  windowsPanel: el("windows-panel"),
  plotPanel: el("plot-panel"),
  framesPanel: el("frames-panel"),
  summaryPanel: el("summary-panel"),
  heatmapPanel: el("heatmap-panel"),
  heatmapKind: el("heatmap-kind"),
  historyPanel: el("history-panel"),
};

const base = (window as unknown as { VIZEX_API_BASE?: string }).VIZEX_API_BASE ?? "";
const app = new ExplorerApp(new ApiClient(base), elements);
void app.start();

/**
 * Explorer app wiring: project picker, query box, ranked windows, the
 * dual-axis evidence plot with a frame strip, heatmaps, summary statistics,
 * and the query history. One query in flight at a time; stale responses are
 * discarded by sequence number.
 */

import { ApiClient, ApiRequestError, ProjectInfo, QueryResult } from "./api.js";
import { ppmToBmpDataUrl } from "./ppm.js";
import { renderHeatmap } from "./render/heatmap.js";
import { renderEvidenceWindow, renderFrameStrip } from "./render/plot.js";
import { renderQueryError } from "./render/queryError.js";
import { renderSummary } from "./render/summary.js";
import { renderWindowList } from "./render/windows.js";
import { Workspace } from "./state.js";

export interface AppElements {
  projectSelect: HTMLSelectElement;
  queryInput: HTMLTextAreaElement;
  runButton: HTMLButtonElement;
  errorPanel: HTMLElement;
  windowsPanel: HTMLElement;
  plotPanel: HTMLElement;
  framesPanel: HTMLElement;
  summaryPanel: HTMLElement;
  heatmapPanel: HTMLElement;
  heatmapKind: HTMLSelectElement;
  historyPanel: HTMLElement;
}

export class FrameCache {
  private cache = new Map<number, string | null>();
  private disabled = false;

  constructor(private client: ApiClient, private projectId: string) {}

  async frameUrl(frame: number): Promise<string | null> {
    if (this.disabled) return null;
    const hit = this.cache.get(frame);
    if (hit !== undefined) return hit;
    try {
      const bytes = await this.client.frame(this.projectId, frame);
      const url = ppmToBmpDataUrl(bytes);
      this.cache.set(frame, url);
      return url;
    } catch (err) {
      if (err instanceof ApiRequestError && err.code === "FRAMES_DISABLED") {
        this.disabled = true; // privacy mode: placeholders from now on
        return null;
      }
      this.cache.set(frame, null);
      return null;
    }
  }
}

export class ExplorerApp {
  readonly workspace = new Workspace();
  private projects: ProjectInfo[] = [];
  private frames: FrameCache | null = null;
  private inFlight = false;

  constructor(private client: ApiClient, private ui: AppElements) {
    ui.runButton.addEventListener("click", () => void this.runQuery());
    ui.projectSelect.addEventListener("change", () => {
      this.selectProject(ui.projectSelect.value);
    });
    ui.heatmapKind.addEventListener("change", () => void this.refreshHeatmap());
    ui.queryInput.addEventListener("keydown", (ev) => {
      if ((ev as KeyboardEvent).key === "Enter" && (ev as KeyboardEvent).ctrlKey) {
        void this.runQuery();
      }
    });
  }

  async start(): Promise<void> {
    this.projects = await this.client.listProjects();
    this.ui.projectSelect.textContent = "";
    for (const p of this.projects) {
      const opt = document.createElement("option");
      opt.value = p.id;
      opt.textContent = `${p.name} (${p.frameCount} frames)`;
      this.ui.projectSelect.appendChild(opt);
    }
    if (this.projects.length) {
      this.selectProject(this.projects[0].id);
    }
  }

  selectProject(id: string): void {
    this.workspace.selectProject(id);
    this.frames = new FrameCache(this.client, id);
    this.ui.windowsPanel.textContent = "";
    this.ui.plotPanel.textContent = "";
    this.ui.framesPanel.textContent = "";
    this.ui.summaryPanel.textContent = "";
    void this.refreshHeatmap();
  }

  async runQuery(): Promise<QueryResult | null> {
    const pid = this.workspace.projectId;
    if (!pid || this.inFlight) return null;
    const text = this.ui.queryInput.value.trim();
    if (!text) return null;

    const seq = this.workspace.beginQuery(text);
    this.inFlight = true;
    this.ui.runButton.disabled = true;
    this.ui.errorPanel.textContent = "";
    try {
      const result = await this.client.query(pid, text);
      if (this.workspace.acceptResult(seq, result)) {
        this.renderResult();
        this.renderHistory();
      }
      return result;
    } catch (err) {
      renderQueryError(this.ui.errorPanel, text, err);
      return null;
    } finally {
      this.inFlight = false;
      this.ui.runButton.disabled = false;
    }
  }

  private renderResult(): void {
    const result = this.workspace.lastResult;
    if (!result) return;
    renderWindowList(this.ui.windowsPanel, result, this.workspace.selectedWindow, (i) => {
      this.workspace.selectWindow(i);
      this.renderResult();
    });
    renderSummary(this.ui.summaryPanel, result);
    const window = result.windows[this.workspace.selectedWindow] ?? null;
    renderEvidenceWindow(this.ui.plotPanel, window);
    if (window && this.frames) {
      void renderFrameStrip(this.ui.framesPanel, window.sampleFrames, this.frames);
    } else {
      this.ui.framesPanel.textContent = "";
    }
  }

  private renderHistory(): void {
    const panel = this.ui.historyPanel;
    panel.textContent = "";
    const list = document.createElement("ul");
    list.className = "history-list";
    for (const entry of this.workspace.history) {
      const item = document.createElement("li");
      item.className = "history-item";
      item.title = `content hash ${entry.contentHash}`;
      item.textContent = entry.query;
      item.addEventListener("click", () => {
        this.ui.queryInput.value = entry.query;
        void this.runQuery();
      });
      list.appendChild(item);
    }
    panel.appendChild(list);
  }

  private async refreshHeatmap(): Promise<void> {
    const pid = this.workspace.projectId;
    if (!pid) return;
    const kind = this.ui.heatmapKind.value || "undercount";
    try {
      const heatmap = await this.client.heatmap(pid, kind);
      const project = this.projects.find((p) => p.id === pid);
      let background: string | null = null;
      if (project?.framesEnabled && this.frames) {
        background = await this.frames.frameUrl(Math.floor(project.frameCount / 2));
      }
      renderHeatmap(this.ui.heatmapPanel, heatmap, background);
    } catch (err) {
      renderQueryError(this.ui.heatmapPanel, "", err);
    }
  }
}

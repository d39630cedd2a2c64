import { readFileSync } from "node:fs";
import { resolve } from "node:path";

import type { AppElements } from "../src/app.js";
import type { FetchLike } from "../src/api.js";

// vitest runs from the frontend root; jsdom mangles import.meta.url
const FIXTURES = resolve(process.cwd(), "tests", "fixtures");

export function fixtureJson(name: string): unknown {
  return JSON.parse(readFileSync(resolve(FIXTURES, name), "utf8"));
}

export function fixtureBytes(name: string): Uint8Array {
  return new Uint8Array(readFileSync(resolve(FIXTURES, name)));
}

export function projectId(): string {
  return (fixtureJson("projects.json") as Array<{ id: string }>)[0].id;
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export interface FixtureServerOptions {
  framesEnabled?: boolean;
  /** maps query text to a fixture name or [fixture, status] */
  queryRoutes?: Record<string, string | [string, number]>;
}

/** A fetch stub that serves the captured API fixtures. */
export function fixtureServer(options: FixtureServerOptions = {}): FetchLike {
  const framesEnabled = options.framesEnabled ?? true;
  const queryRoutes = options.queryRoutes ?? {};
  const pid = projectId();

  return async (url: string, init?: RequestInit): Promise<Response> => {
    const u = new URL(url, "http://fixture.test");
    const path = u.pathname;

    if (path === "/api/projects") return json(fixtureJson("projects.json"));
    if (path === `/api/projects/${pid}`) return json(fixtureJson("project.json"));
    if (path === `/api/projects/${pid}/series`) return json(fixtureJson("series_index.json"));
    if (path === `/api/projects/${pid}/series/luminosity`) {
      return json(fixtureJson("series_luminosity.json"));
    }
    if (path === `/api/projects/${pid}/metrics/count_error`) {
      return json(fixtureJson("metric_count_error.json"));
    }
    if (path === `/api/projects/${pid}/heatmap`) {
      const kind = u.searchParams.get("kind") ?? "undercount";
      return json(fixtureJson(`heatmap_${kind}.json`));
    }
    if (path.startsWith(`/api/projects/${pid}/frames/`)) {
      if (!framesEnabled) return json(fixtureJson("error_frames_disabled.json"), 403);
      const body = fixtureBytes("frame_150.ppm");
      const buf = new ArrayBuffer(body.length);
      new Uint8Array(buf).set(body);
      return new Response(buf, {
        status: 200,
        headers: { "content-type": "image/x-portable-pixmap" },
      });
    }
    if (path === `/api/projects/${pid}/query` && (init?.method ?? "GET") === "POST") {
      const body = JSON.parse(String(init?.body ?? "{}")) as { text?: string };
      const route = queryRoutes[body.text ?? ""];
      if (route) {
        const [name, status] = typeof route === "string" ? [route, 200] : route;
        return json(fixtureJson(name), status);
      }
      return json(fixtureJson("query_result.json"));
    }
    return json({ code: "UNKNOWN_ROUTE", message: `no fixture for ${path}` }, 404);
  };
}

export function buildDom(): AppElements {
  document.body.innerHTML = `
    <select id="project-select"></select>
    <textarea id="query-input"></textarea>
    <button id="run-button"></button>
    <div id="error-panel"></div>
    <div id="windows-panel"></div>
    <div id="plot-panel"></div>
    <div id="frames-panel"></div>
    <div id="summary-panel"></div>
    <div id="heatmap-panel"></div>
    <select id="heatmap-kind">
      <option value="undercount" selected>undercount</option>
      <option value="overcount">overcount</option>
    </select>
    <div id="history-panel"></div>
  `;
  const get = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;
  return {
    projectSelect: get("project-select"),
    queryInput: get("query-input"),
    runButton: get("run-button"),
    errorPanel: get("error-panel"),
    windowsPanel: get("windows-panel"),
    plotPanel: get("plot-panel"),
    framesPanel: get("frames-panel"),
    summaryPanel: get("summary-panel"),
    heatmapPanel: get("heatmap-panel"),
    heatmapKind: get("heatmap-kind"),
    historyPanel: get("history-panel"),
  };
}

export async function settle(): Promise<void> {
  // drain chained microtasks from async render paths
  for (let i = 0; i < 10; i++) await Promise.resolve();
}

/**
 * Typed client for the analysis server's HTTP API.
 *
 * Every response passes through a decoder before the UI sees it; rendering
 * code only ever touches decoded fields, never raw JSON. The UI does no
 * analytics of its own: all numbers displayed trace back to response fields.
 */

export class DecodeError extends Error {
  constructor(public path: string, public expected: string, public got: unknown) {
    super(`decode ${path}: expected ${expected}, got ${JSON.stringify(got)?.slice(0, 80)}`);
  }
}

export interface ErrorPosition {
  line: number;
  col: number;
}

export class ApiRequestError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public position: ErrorPosition | null = null,
  ) {
    super(message);
  }
}

export interface ProjectInfo {
  id: string;
  name: string;
  width: number;
  height: number;
  frameCount: number;
  fps: number;
  labelOfInterest: string;
  kpis: string[];
  metrics: string[];
  framesEnabled: boolean;
}

export interface SeriesPayload {
  frames: number[];
  values: number[];
}

export interface HeatmapPayload {
  kind: "overcount" | "undercount";
  gridRows: number;
  gridCols: number;
  cells: number[][];
}

export interface FitLine {
  frames: number[];
  values: number[];
  slope: number;
  interceptAtCut: number;
}

export interface PlotSeries {
  name: string;
  frames: number[];
  values: number[];
  cut: number;
  leftFit: FitLine | null;
  rightFit: FitLine | null;
}

export interface DiscontinuityInfo {
  cutpoint: number;
  tau: number;
  seTau: number;
  tStat: number;
  bandwidth: number;
}

export interface MatchedAtom {
  kpi: string;
  kpiDisc: DiscontinuityInfo;
  metricDisc: DiscontinuityInfo;
  lag: number;
  score: number;
}

export interface EvidenceWindow {
  startFrame: number;
  endFrame: number;
  score: number;
  sampleFrames: number[];
  matchedAtoms: MatchedAtom[];
  metricPlot: PlotSeries | null;
  kpiPlots: PlotSeries[];
}

export interface KpiSummary {
  windows: number;
  meanAbsTau: number;
  meanScore: number;
  strongestWindow: number | null;
}

export interface QueryResult {
  query: string;
  bandwidth: number;
  delta: number;
  alpha: number;
  resultId: string | null;
  windows: EvidenceWindow[];
  totalWindows: number;
  perKpi: Map<string, KpiSummary>;
}

// ---------------------------------------------------------------------------
// decoding primitives

function asObject(v: unknown, path: string): Record<string, unknown> {
  if (typeof v !== "object" || v === null || Array.isArray(v)) {
    throw new DecodeError(path, "object", v);
  }
  return v as Record<string, unknown>;
}

function asNumber(v: unknown, path: string): number {
  if (typeof v !== "number" || Number.isNaN(v)) throw new DecodeError(path, "number", v);
  return v;
}

function asString(v: unknown, path: string): string {
  if (typeof v !== "string") throw new DecodeError(path, "string", v);
  return v;
}

function asBoolean(v: unknown, path: string): boolean {
  if (typeof v !== "boolean") throw new DecodeError(path, "boolean", v);
  return v;
}

function asArray(v: unknown, path: string): unknown[] {
  if (!Array.isArray(v)) throw new DecodeError(path, "array", v);
  return v;
}

function numberArray(v: unknown, path: string): number[] {
  return asArray(v, path).map((x, i) => asNumber(x, `${path}[${i}]`));
}

function stringArray(v: unknown, path: string): string[] {
  return asArray(v, path).map((x, i) => asString(x, `${path}[${i}]`));
}

// ---------------------------------------------------------------------------
// response decoders

export function decodeProject(raw: unknown, path = "project"): ProjectInfo {
  const o = asObject(raw, path);
  return {
    id: asString(o.id, `${path}.id`),
    name: asString(o.name, `${path}.name`),
    width: asNumber(o.width, `${path}.width`),
    height: asNumber(o.height, `${path}.height`),
    frameCount: asNumber(o.frame_count, `${path}.frame_count`),
    fps: asNumber(o.fps, `${path}.fps`),
    labelOfInterest: asString(o.label_of_interest, `${path}.label_of_interest`),
    kpis: stringArray(o.kpis, `${path}.kpis`),
    metrics: stringArray(o.metrics, `${path}.metrics`),
    framesEnabled: asBoolean(o.frames_enabled, `${path}.frames_enabled`),
  };
}

export function decodeProjects(raw: unknown): ProjectInfo[] {
  return asArray(raw, "projects").map((p, i) => decodeProject(p, `projects[${i}]`));
}

export function decodeSeries(raw: unknown, path = "series"): SeriesPayload {
  const o = asObject(raw, path);
  const frames = numberArray(o.frames, `${path}.frames`);
  const values = numberArray(o.values, `${path}.values`);
  if (frames.length !== values.length) {
    throw new DecodeError(path, "frames/values of equal length", raw);
  }
  return { frames, values };
}

export function decodeHeatmap(raw: unknown, path = "heatmap"): HeatmapPayload {
  const o = asObject(raw, path);
  const kind = asString(o.kind, `${path}.kind`);
  if (kind !== "overcount" && kind !== "undercount") {
    throw new DecodeError(`${path}.kind`, "overcount|undercount", kind);
  }
  const rows = asNumber(o.grid_rows, `${path}.grid_rows`);
  const cols = asNumber(o.grid_cols, `${path}.grid_cols`);
  const cells = asArray(o.cells, `${path}.cells`).map((row, i) =>
    numberArray(row, `${path}.cells[${i}]`),
  );
  if (cells.length !== rows || cells.some((r) => r.length !== cols)) {
    throw new DecodeError(`${path}.cells`, `${rows}x${cols} matrix`, o.cells);
  }
  return { kind, gridRows: rows, gridCols: cols, cells };
}

function decodeFit(raw: unknown, path: string): FitLine | null {
  if (raw === undefined || raw === null) return null;
  const o = asObject(raw, path);
  return {
    frames: numberArray(o.frames, `${path}.frames`),
    values: numberArray(o.values, `${path}.values`),
    slope: asNumber(o.slope, `${path}.slope`),
    interceptAtCut: asNumber(o.intercept_at_cut, `${path}.intercept_at_cut`),
  };
}

function decodePlotSeries(raw: unknown, path: string): PlotSeries {
  const o = asObject(raw, path);
  return {
    name: asString(o.name, `${path}.name`),
    frames: numberArray(o.frames, `${path}.frames`),
    values: numberArray(o.values, `${path}.values`),
    cut: asNumber(o.cut, `${path}.cut`),
    leftFit: decodeFit(o.left_fit, `${path}.left_fit`),
    rightFit: decodeFit(o.right_fit, `${path}.right_fit`),
  };
}

function decodeDisc(raw: unknown, path: string): DiscontinuityInfo {
  const o = asObject(raw, path);
  return {
    cutpoint: asNumber(o.cutpoint, `${path}.cutpoint`),
    tau: asNumber(o.tau, `${path}.tau`),
    seTau: asNumber(o.se_tau, `${path}.se_tau`),
    tStat: asNumber(o.t_stat, `${path}.t_stat`),
    bandwidth: asNumber(o.bandwidth, `${path}.bandwidth`),
  };
}

function decodeWindow(raw: unknown, path: string): EvidenceWindow {
  const o = asObject(raw, path);
  const atoms = asArray(o.matched_atoms, `${path}.matched_atoms`).map((a, i) => {
    const ao = asObject(a, `${path}.matched_atoms[${i}]`);
    const ev = asObject(ao.evidence, `${path}.matched_atoms[${i}].evidence`);
    return {
      kpi: asString(ao.kpi, `${path}.matched_atoms[${i}].kpi`),
      kpiDisc: decodeDisc(ev.kpi, `${path}.matched_atoms[${i}].evidence.kpi`),
      metricDisc: decodeDisc(ev.metric, `${path}.matched_atoms[${i}].evidence.metric`),
      lag: asNumber(ev.lag, `${path}.matched_atoms[${i}].evidence.lag`),
      score: asNumber(ev.score, `${path}.matched_atoms[${i}].evidence.score`),
    };
  });
  const plot = o.plot_data === undefined || o.plot_data === null
    ? { metric: undefined as unknown, kpis: [] as unknown[] }
    : asObject(o.plot_data, `${path}.plot_data`);
  return {
    startFrame: asNumber(o.start_frame, `${path}.start_frame`),
    endFrame: asNumber(o.end_frame, `${path}.end_frame`),
    score: asNumber(o.score, `${path}.score`),
    sampleFrames: numberArray(o.sample_frames, `${path}.sample_frames`),
    matchedAtoms: atoms,
    metricPlot:
      plot.metric === undefined || plot.metric === null
        ? null
        : decodePlotSeries(plot.metric, `${path}.plot_data.metric`),
    kpiPlots:
      plot.kpis === undefined || plot.kpis === null
        ? []
        : asArray(plot.kpis, `${path}.plot_data.kpis`).map((k, i) =>
            decodePlotSeries(k, `${path}.plot_data.kpis[${i}]`),
          ),
  };
}

export function decodeQueryResult(raw: unknown): QueryResult {
  const o = asObject(raw, "result");
  const summary = asObject(o.summary, "result.summary");
  const perKpiRaw = asObject(summary.per_kpi, "result.summary.per_kpi");
  const perKpi = new Map<string, KpiSummary>();
  for (const [name, v] of Object.entries(perKpiRaw)) {
    const s = asObject(v, `result.summary.per_kpi.${name}`);
    perKpi.set(name, {
      windows: asNumber(s.windows, `result.summary.per_kpi.${name}.windows`),
      meanAbsTau: asNumber(s.mean_abs_tau, `result.summary.per_kpi.${name}.mean_abs_tau`),
      meanScore: asNumber(s.mean_score, `result.summary.per_kpi.${name}.mean_score`),
      strongestWindow:
        s.strongest_window === null || s.strongest_window === undefined
          ? null
          : asNumber(s.strongest_window, `result.summary.per_kpi.${name}.strongest_window`),
    });
  }
  return {
    query: asString(o.query, "result.query"),
    bandwidth: asNumber(o.bandwidth, "result.bandwidth"),
    delta: asNumber(o.delta, "result.delta"),
    alpha: asNumber(o.alpha, "result.alpha"),
    resultId: typeof o.result_id === "string" ? o.result_id : null,
    windows: asArray(o.windows, "result.windows").map((w, i) =>
      decodeWindow(w, `result.windows[${i}]`),
    ),
    totalWindows: asNumber(summary.total_windows, "result.summary.total_windows"),
    perKpi,
  };
}

export function decodeApiError(raw: unknown, status: number): ApiRequestError {
  try {
    const o = asObject(raw, "error");
    const code = asString(o.code, "error.code");
    const message = asString(o.message, "error.message");
    let position: ErrorPosition | null = null;
    if (o.position !== undefined && o.position !== null) {
      const p = asObject(o.position, "error.position");
      position = { line: asNumber(p.line, "error.position.line"), col: asNumber(p.col, "error.position.col") };
    }
    return new ApiRequestError(status, code, message, position);
  } catch {
    return new ApiRequestError(status, "UNKNOWN", `request failed with status ${status}`);
  }
}

// ---------------------------------------------------------------------------
// client

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async getJson(path: string): Promise<unknown> {
    const resp = await this.fetchFn(`${this.base}${path}`);
    const body = await resp.json();
    if (!resp.ok) throw decodeApiError(body, resp.status);
    return body;
  }

  async listProjects(): Promise<ProjectInfo[]> {
    return decodeProjects(await this.getJson("/api/projects"));
  }

  async project(pid: string): Promise<ProjectInfo> {
    return decodeProject(await this.getJson(`/api/projects/${pid}`));
  }

  async kpiSeries(pid: string, name: string): Promise<SeriesPayload> {
    return decodeSeries(await this.getJson(`/api/projects/${pid}/series/${name}`));
  }

  async metricSeries(pid: string, name: string): Promise<SeriesPayload> {
    return decodeSeries(await this.getJson(`/api/projects/${pid}/metrics/${name}`));
  }

  async heatmap(pid: string, kind: string, grid = 4): Promise<HeatmapPayload> {
    return decodeHeatmap(await this.getJson(`/api/projects/${pid}/heatmap?kind=${kind}&grid=${grid}`));
  }

  async query(pid: string, text: string, options?: Record<string, number>): Promise<QueryResult> {
    const resp = await this.fetchFn(`${this.base}/api/projects/${pid}/query`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(options ? { text, options } : { text }),
    });
    const body = await resp.json();
    if (!resp.ok) throw decodeApiError(body, resp.status);
    return decodeQueryResult(body);
  }

  /** Raw frame bytes (PPM); throws ApiRequestError on 403/404. */
  async frame(pid: string, n: number): Promise<Uint8Array> {
    const resp = await this.fetchFn(`${this.base}/api/projects/${pid}/frames/${n}`);
    if (!resp.ok) {
      let body: unknown = null;
      try {
        body = await resp.json();
      } catch {
        /* non-JSON error body */
      }
      throw decodeApiError(body, resp.status);
    }
    return new Uint8Array(await resp.arrayBuffer());
  }
}

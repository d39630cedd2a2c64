/**
 * Dual-axis evidence plot: the KPI series on the left axis, the error metric
 * on the right axis, vertical lines at the matched cutpoints, and the two
 * local linear fits drawn on their own sides of each cut. All geometry comes
 * straight from response fields; the renderer only maps coordinates.
 */

import type { EvidenceWindow, PlotSeries } from "../api.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface PlotLayout {
  width: number;
  height: number;
  margin: { left: number; right: number; top: number; bottom: number };
}

export const DEFAULT_LAYOUT: PlotLayout = {
  width: 720,
  height: 280,
  margin: { left: 52, right: 52, top: 18, bottom: 28 },
};

interface Scale {
  (v: number): number;
  domain: [number, number];
}

function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const fn = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  fn.domain = domain;
  return fn;
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  const pad = (hi - lo) * 0.08;
  return [lo - pad, hi + pad];
}

function el<K extends string>(tag: K, attrs: Record<string, string | number>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

function polyline(
  series: PlotSeries,
  x: Scale,
  y: Scale,
  className: string,
): SVGElement | null {
  if (series.frames.length === 0) return null;
  const points = series.frames.map((f, i) => `${x(f).toFixed(1)},${y(series.values[i]).toFixed(1)}`);
  return el("polyline", { points: points.join(" "), class: className, fill: "none" });
}

function fitLines(series: PlotSeries, x: Scale, y: Scale, className: string): SVGElement[] {
  const out: SVGElement[] = [];
  for (const [side, fit] of [["left", series.leftFit], ["right", series.rightFit]] as const) {
    if (!fit || fit.frames.length < 2) continue;
    out.push(
      el("line", {
        x1: x(fit.frames[0]),
        y1: y(fit.values[0]),
        x2: x(fit.frames[fit.frames.length - 1]),
        y2: y(fit.values[fit.values.length - 1]),
        class: `${className} fit-line fit-${side}`,
      }),
    );
  }
  return out;
}

export interface FrameProvider {
  /** Resolves to a data URL, or null when frames are unavailable (privacy). */
  frameUrl(frame: number): Promise<string | null>;
}

export function renderEvidenceWindow(
  container: HTMLElement,
  window: EvidenceWindow | null,
  layout: PlotLayout = DEFAULT_LAYOUT,
): void {
  container.textContent = "";
  container.classList.add("evidence-plot");

  if (!window || (!window.metricPlot && window.kpiPlots.length === 0)) {
    const placeholder = document.createElement("div");
    placeholder.className = "plot-placeholder";
    placeholder.textContent = "No plot data for this window.";
    container.appendChild(placeholder);
    return;
  }

  const { width, height, margin } = layout;
  const svg = el("svg", {
    viewBox: `0 0 ${width} ${height}`,
    width,
    height,
    class: "dual-axis-plot",
  });

  const allSeries: PlotSeries[] = [...window.kpiPlots];
  if (window.metricPlot) allSeries.push(window.metricPlot);
  const frames = allSeries.flatMap((s) => s.frames);
  const x = linearScale(extent(frames), [margin.left, width - margin.right]);

  const kpiValues = window.kpiPlots.flatMap((s) => {
    const vals = [...s.values];
    for (const fit of [s.leftFit, s.rightFit]) if (fit) vals.push(...fit.values);
    return vals;
  });
  const yLeft = linearScale(
    extent(kpiValues.length ? kpiValues : [0, 1]),
    [height - margin.bottom, margin.top],
  );
  const metricValues = window.metricPlot
    ? [
        ...window.metricPlot.values,
        ...(window.metricPlot.leftFit?.values ?? []),
        ...(window.metricPlot.rightFit?.values ?? []),
      ]
    : [0, 1];
  const yRight = linearScale(extent(metricValues), [height - margin.bottom, margin.top]);

  // axes
  svg.appendChild(
    el("line", {
      x1: margin.left, y1: margin.top, x2: margin.left, y2: height - margin.bottom,
      class: "axis axis-left",
    }),
  );
  svg.appendChild(
    el("line", {
      x1: width - margin.right, y1: margin.top,
      x2: width - margin.right, y2: height - margin.bottom,
      class: "axis axis-right",
    }),
  );
  svg.appendChild(
    el("line", {
      x1: margin.left, y1: height - margin.bottom,
      x2: width - margin.right, y2: height - margin.bottom,
      class: "axis axis-bottom",
    }),
  );
  for (const [scale, cls, anchor, xpos] of [
    [yLeft, "tick-left", "end", margin.left - 6],
    [yRight, "tick-right", "start", width - margin.right + 6],
  ] as const) {
    for (const frac of [0, 0.5, 1]) {
      const v = scale.domain[0] + frac * (scale.domain[1] - scale.domain[0]);
      const label = el("text", {
        x: xpos, y: scale(v) + 4, class: `tick ${cls}`, "text-anchor": anchor,
      });
      label.textContent = v.toPrecision(4);
      svg.appendChild(label);
    }
  }

  // cut lines: one per distinct cutpoint across the plotted series
  const cuts = new Map<number, string>();
  for (const s of window.kpiPlots) cuts.set(s.cut, s.name);
  if (window.metricPlot) cuts.set(window.metricPlot.cut, window.metricPlot.name);
  for (const [cut, name] of [...cuts.entries()].sort((a, b) => a[0] - b[0])) {
    svg.appendChild(
      el("line", {
        x1: x(cut - 0.5), y1: margin.top, x2: x(cut - 0.5), y2: height - margin.bottom,
        class: "cutline",
        "data-cut": cut,
      }),
    );
    const label = el("text", {
      x: x(cut - 0.5) + 3, y: margin.top + 10, class: "cutline-label",
    });
    label.textContent = `${name} @ ${cut}`;
    svg.appendChild(label);
  }

  // series + fit overlays
  for (const s of window.kpiPlots) {
    const line = polyline(s, x, yLeft, "series-line kpi-line");
    if (line) {
      line.setAttribute("data-name", s.name);
      svg.appendChild(line);
    }
    for (const fit of fitLines(s, x, yLeft, "kpi-fit")) svg.appendChild(fit);
  }
  if (window.metricPlot) {
    const line = polyline(window.metricPlot, x, yRight, "series-line metric-line");
    if (line) {
      line.setAttribute("data-name", window.metricPlot.name);
      svg.appendChild(line);
    }
    for (const fit of fitLines(window.metricPlot, x, yRight, "metric-fit")) svg.appendChild(fit);
  }

  container.appendChild(svg);

  const legend = document.createElement("div");
  legend.className = "plot-legend";
  const parts = window.kpiPlots.map((s) => `${s.name} (left)`);
  if (window.metricPlot) parts.push(`${window.metricPlot.name} (right)`);
  legend.textContent = parts.join("  ·  ");
  container.appendChild(legend);
}

export async function renderFrameStrip(
  container: HTMLElement,
  frames: number[],
  provider: FrameProvider,
): Promise<void> {
  container.textContent = "";
  container.classList.add("frame-strip");
  for (const frame of frames) {
    const cell = document.createElement("figure");
    cell.className = "frame-cell";
    const url = await provider.frameUrl(frame);
    if (url) {
      const img = document.createElement("img");
      img.src = url;
      img.alt = `frame ${frame}`;
      cell.appendChild(img);
    } else {
      const ph = document.createElement("div");
      ph.className = "frame-placeholder";
      ph.textContent = "frames disabled";
      cell.appendChild(ph);
    }
    const caption = document.createElement("figcaption");
    caption.textContent = `frame ${frame}`;
    cell.appendChild(caption);
    container.appendChild(cell);
  }
}

/**
 * Workspace state: selected project, query text, last result, selection,
 * viewport, and an append-only query history.
 *
 * Responses are accepted through a monotone request sequence number so a
 * stale response (superseded by a newer query) can never overwrite a fresher
 * one; the UI keeps a single query in flight at a time.
 */

import type { QueryResult } from "./api.js";

export interface HistoryEntry {
  query: string;
  resultId: string | null;
  contentHash: string;
}

export interface Viewport {
  from: number;
  to: number;
}

/** Canonical JSON: object keys sorted recursively, so hashes are stable. */
export function canonicalJson(value: unknown): string {
  if (value === null || typeof value !== "object") return JSON.stringify(value);
  if (Array.isArray(value)) return `[${value.map(canonicalJson).join(",")}]`;
  const entries = Object.entries(value as Record<string, unknown>)
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([k, v]) => `${JSON.stringify(k)}:${canonicalJson(v)}`);
  return `{${entries.join(",")}}`;
}

/** FNV-1a over the canonical JSON; deterministic and dependency-free. */
export function contentHash(value: unknown): string {
  const text = canonicalJson(value);
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash.toString(16).padStart(8, "0");
}

function resultFingerprint(result: QueryResult): unknown {
  return {
    query: result.query,
    windows: result.windows.map((w) => ({
      start: w.startFrame,
      end: w.endFrame,
      score: w.score,
      atoms: w.matchedAtoms.map((a) => [a.kpi, a.kpiDisc.cutpoint, a.metricDisc.cutpoint, a.score]),
    })),
  };
}

export class Workspace {
  projectId: string | null = null;
  queryText = "";
  lastResult: QueryResult | null = null;
  selectedWindow = 0;
  viewport: Viewport | null = null;

  private historyEntries: HistoryEntry[] = [];
  private issued = 0;
  private latestAccepted = 0;

  get history(): readonly HistoryEntry[] {
    return this.historyEntries;
  }

  selectProject(id: string): void {
    this.projectId = id;
    this.lastResult = null;
    this.selectedWindow = 0;
    this.viewport = null;
  }

  /** Reserve a sequence number for an outgoing query. */
  beginQuery(text: string): number {
    this.queryText = text;
    this.issued += 1;
    return this.issued;
  }

  /** Accept a response unless a newer request already landed. Returns
   * whether the result was applied. */
  acceptResult(seq: number, result: QueryResult): boolean {
    if (seq <= this.latestAccepted) return false;
    this.latestAccepted = seq;
    this.lastResult = result;
    this.selectedWindow = 0;
    this.viewport = null;
    this.historyEntries.push({
      query: result.query,
      resultId: result.resultId,
      contentHash: contentHash(resultFingerprint(result)),
    });
    return true;
  }

  selectWindow(index: number): void {
    const count = this.lastResult?.windows.length ?? 0;
    if (index < 0 || index >= count) return;
    this.selectedWindow = index;
    this.viewport = null;
  }

  setViewport(from: number, to: number): void {
    if (from <= to) this.viewport = { from, to };
  }
}

"""Evaluation-metric series and spatial error heatmaps.

Counting errors are per-frame classes: undercount (-1), correct (0),
overcount (+1), the sign of detected minus ground-truth count for one label.
Spatial attribution uses greedy IoU matching; heat in a grid cell is the
per-frame rate of unmatched box centers falling in that cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ingest import Box, PredictionLog

UNDERCOUNT = -1
CORRECT = 0
OVERCOUNT = 1

ERROR_CLASS = "error_class"
CORRECT_RATE = "correct_rate"
CUSTOM = "custom"


@dataclass(frozen=True)
class MetricSeries:
    name: str
    points: tuple[tuple[int, float], ...]  # (frame_index, value)
    kind: str = CUSTOM

    def frames(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=np.int64)

    def values(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=np.float64)


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int, float], ...]  # (gt_id, det_id, iou)
    unmatched_gt: tuple[int, ...]
    unmatched_det: tuple[int, ...]


@dataclass(frozen=True)
class Heatmap:
    grid_rows: int
    grid_cols: int
    cells: tuple[tuple[float, ...], ...]  # per-frame rates
    counts: tuple[tuple[int, ...], ...]  # raw unmatched-box tallies
    kind: str


def count_error_class(det_count: int, gt_count: int) -> int:
    """Sign of det_count - gt_count mapped onto the error classes."""
    if det_count < gt_count:
        return UNDERCOUNT
    if det_count > gt_count:
        return OVERCOUNT
    return CORRECT


def error_series(pred_log: PredictionLog, gt_log: PredictionLog, label: str) -> MetricSeries:
    """Per-frame counting-error class for one label; one point per frame."""
    assert pred_log.frame_count == gt_log.frame_count, "logs cover different frame ranges"
    points = []
    for t in range(pred_log.frame_count):
        det = sum(1 for b in pred_log.boxes_at(t) if b.label == label)
        gt = sum(1 for b in gt_log.boxes_at(t) if b.label == label)
        points.append((t, float(count_error_class(det, gt))))
    return MetricSeries(name="count_error", points=tuple(points), kind=ERROR_CLASS)


def correct_rate(errors: MetricSeries, w: int) -> MetricSeries:
    """Windowed fraction of frames with class correct, stamped at window end."""
    assert w >= 1
    values = errors.values()
    frames = errors.frames()
    hits = (values == CORRECT).astype(np.float64)
    points = [
        (int(frames[t]), float(np.mean(hits[t - w + 1 : t + 1])))
        for t in range(w - 1, len(hits))
    ]
    return MetricSeries(name=f"{errors.name}_correct_rate_w{w}", points=tuple(points), kind=CORRECT_RATE)


def iou(a: Box, b: Box) -> float:
    ix = max(0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.area() + b.area() - inter
    return inter / union if union > 0 else 0.0


def match_boxes(
    gt_boxes: tuple[Box, ...] | list[Box],
    det_boxes: tuple[Box, ...] | list[Box],
    iou_threshold: float = 0.5,
) -> Matching:
    """Greedy matching by descending IoU; ties broken by (gt_id, det_id).

    Box ids are positions within the input lists. Pairs require IoU >= threshold.
    """
    assert 0.0 < iou_threshold <= 1.0
    candidates = []
    for gi, g in enumerate(gt_boxes):
        for di, d in enumerate(det_boxes):
            score = iou(g, d)
            if score >= iou_threshold:
                candidates.append((-score, gi, di))
    candidates.sort()
    used_gt: set[int] = set()
    used_det: set[int] = set()
    pairs = []
    for neg, gi, di in candidates:
        if gi in used_gt or di in used_det:
            continue
        used_gt.add(gi)
        used_det.add(di)
        pairs.append((gi, di, -neg))
    return Matching(
        pairs=tuple(pairs),
        unmatched_gt=tuple(i for i in range(len(gt_boxes)) if i not in used_gt),
        unmatched_det=tuple(i for i in range(len(det_boxes)) if i not in used_det),
    )


def _cell_of(center: tuple[float, float], width: int, height: int, rows: int, cols: int) -> tuple[int, int]:
    cx, cy = center
    col = min(int(cx * cols / width), cols - 1)
    row = min(int(cy * rows / height), rows - 1)
    return row, col


def error_heatmap(
    pred_log: PredictionLog,
    gt_log: PredictionLog,
    label: str,
    width: int,
    height: int,
    grid_rows: int = 4,
    grid_cols: int = 4,
    iou_threshold: float = 0.5,
) -> tuple[Heatmap, Heatmap]:
    """(overcount, undercount) heatmaps over the scene grid.

    Overcount heat of a cell is the count of unmatched detections centered in
    it divided by frame_count; undercount analogously over unmatched ground
    truth. Raw counts are kept on the Heatmap for exact mass checks.
    """
    over = np.zeros((grid_rows, grid_cols), dtype=np.int64)
    under = np.zeros((grid_rows, grid_cols), dtype=np.int64)
    n = pred_log.frame_count
    for t in range(n):
        gt = [b for b in gt_log.boxes_at(t) if b.label == label]
        det = [b for b in pred_log.boxes_at(t) if b.label == label]
        matching = match_boxes(gt, det, iou_threshold)
        for di in matching.unmatched_det:
            r, c = _cell_of(det[di].center(), width, height, grid_rows, grid_cols)
            over[r, c] += 1
        for gi in matching.unmatched_gt:
            r, c = _cell_of(gt[gi].center(), width, height, grid_rows, grid_cols)
            under[r, c] += 1

    def build(counts: np.ndarray, kind: str) -> Heatmap:
        rates = counts.astype(np.float64) / n
        return Heatmap(
            grid_rows=grid_rows,
            grid_cols=grid_cols,
            cells=tuple(tuple(float(v) for v in row) for row in rates),
            counts=tuple(tuple(int(v) for v in row) for row in counts),
            kind=kind,
        )

    return build(over, "overcount"), build(under, "undercount")


def heatmap_to_json(h: Heatmap) -> dict:
    return {
        "kind": h.kind,
        "grid_rows": h.grid_rows,
        "grid_cols": h.grid_cols,
        "cells": [list(row) for row in h.cells],
        "counts": [list(row) for row in h.counts],
    }

"""Per-frame visual features and windowed KPI time series.

Feature functions accept an (H, W, 3) pixel array (uint8 or float) and a
Region. Pixels are promoted to float64 before any averaging; no intermediate
quantization.

The edge detector is the classic four-stage pipeline: 5x5 Gaussian blur
(sigma 1.4), Sobel gradients, non-maximum suppression, double-threshold
hysteresis with low=50 / high=150 applied to the gradient magnitude scaled so
its per-image maximum is 255. Borders clamp to the nearest pixel. Direction
quantization avoids trig entirely (|gy| vs tan(22.5/67.5 deg) * |gx|), so an
independent reimplementation that follows the same stage order reproduces the
edge mask bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptyRegion, RegionTooSmall, UnknownExternal
from .ingest import Box, ExternalSeries, FrameSequence, PredictionLog

WHOLE_FRAME = "whole_frame"
GRID_CELL = "grid_cell"
GT_BOXES = "gt_boxes"
DETECTED_BOXES = "detected_boxes"

LAMBDAS = ("luminosity", "avg_r", "avg_g", "avg_b", "edge_fraction", "detection_count", "external")
AGGREGATORS = ("mean", "min", "max")

# value range per lambda; None = unconstrained (external series)
LAMBDA_RANGE = {
    "luminosity": (0.0, 255.0),
    "avg_r": (0.0, 255.0),
    "avg_g": (0.0, 255.0),
    "avg_b": (0.0, 255.0),
    "edge_fraction": (0.0, 1.0),
    "detection_count": (0.0, math.inf),
    "external": None,
}


@dataclass(frozen=True)
class Region:
    x: int
    y: int
    w: int
    h: int
    kind: str = WHOLE_FRAME

    @staticmethod
    def whole(width: int, height: int) -> "Region":
        return Region(0, 0, width, height, WHOLE_FRAME)

    @staticmethod
    def grid_cell(width: int, height: int, row: int, col: int, rows: int = 4, cols: int = 4) -> "Region":
        if not (0 <= row < rows and 0 <= col < cols):
            raise EmptyRegion(f"grid cell ({row},{col}) outside {rows}x{cols}")
        x0, x1 = (col * width) // cols, ((col + 1) * width) // cols
        y0, y1 = (row * height) // rows, ((row + 1) * height) // rows
        return Region(x0, y0, x1 - x0, y1 - y0, GRID_CELL)

    @staticmethod
    def from_box(box: Box) -> "Region":
        return Region(box.x, box.y, box.w, box.h, "box_region")


def _region_view(pixels: np.ndarray, region: Region) -> np.ndarray:
    h, w = pixels.shape[0], pixels.shape[1]
    x0, y0 = max(region.x, 0), max(region.y, 0)
    x1, y1 = min(region.x + region.w, w), min(region.y + region.h, h)
    if x0 >= x1 or y0 >= y1:
        raise EmptyRegion(f"region {region} empty within {w}x{h} frame")
    return pixels[y0:y1, x0:x1]


def rec601_luma(pixels: np.ndarray) -> np.ndarray:
    """Per-pixel luma 0.299 R + 0.587 G + 0.114 B over an (..., 3) array."""
    acc = np.multiply(pixels[..., 0], 0.299, dtype=np.float64)
    acc += np.multiply(pixels[..., 1], 0.587, dtype=np.float64)
    acc += np.multiply(pixels[..., 2], 0.114, dtype=np.float64)
    return acc


def luminosity(pixels: np.ndarray, region: Region) -> float:
    """Mean luma over the region, in [0, 255]."""
    return float(np.mean(rec601_luma(_region_view(pixels, region))))


def average_color(pixels: np.ndarray, region: Region) -> tuple[float, float, float]:
    """Per-channel mean over the region."""
    view = _region_view(pixels, region).astype(np.float64, copy=False)
    means = view.mean(axis=(0, 1))
    return (float(means[0]), float(means[1]), float(means[2]))


# ---------------------------------------------------------------------------
# edge detection


@dataclass(frozen=True)
class CannyParams:
    sigma: float = 1.4
    kernel_size: int = 5
    low: float = 50.0
    high: float = 150.0


# tan(22.5 deg) and tan(67.5 deg), written in closed form so independent
# implementations derive the exact same constants
TAN_22_5 = math.sqrt(2.0) - 1.0
TAN_67_5 = math.sqrt(2.0) + 1.0

# Sobel taps (row offset, col offset, weight), zero taps omitted. Opposite-sign
# taps are adjacent so the accumulation cancels exactly on constant input;
# otherwise rounding residue would be blown up by the max normalization.
SOBEL_X_TAPS = ((-1, -1, -1.0), (-1, 1, 1.0), (0, -1, -2.0), (0, 1, 2.0), (1, -1, -1.0), (1, 1, 1.0))
SOBEL_Y_TAPS = ((-1, -1, -1.0), (1, -1, 1.0), (-1, 0, -2.0), (1, 0, 2.0), (-1, 1, -1.0), (1, 1, 1.0))


def gaussian_taps(sigma: float, size: int) -> tuple[tuple[int, int, float], ...]:
    """Row-major (di, dj, weight) taps of a normalized size x size Gaussian.

    Weights are exp(-(di^2+dj^2)/(2 sigma^2)) divided by their row-major
    running sum; scalar math only, so any implementation gets identical floats.
    """
    r = size // 2
    raw = []
    total = 0.0
    for di in range(-r, r + 1):
        for dj in range(-r, r + 1):
            w = math.exp(-(di * di + dj * dj) / (2.0 * sigma * sigma))
            raw.append((di, dj, w))
            total += w
    return tuple((di, dj, w / total) for di, dj, w in raw)


def _correlate_clamp(img: np.ndarray, taps, pad: int) -> np.ndarray:
    """Correlate with clamp-to-edge borders, accumulating taps in the given order.

    img has shape (..., H, W); the leading axes are carried through. One
    scratch buffer is reused across taps; per-element operations and their
    order match a scalar loop exactly.
    """
    lead = img.ndim - 2
    h, w = img.shape[-2], img.shape[-1]
    padded = np.pad(img, [(0, 0)] * lead + [(pad, pad), (pad, pad)], mode="edge")
    acc = np.zeros_like(img, dtype=np.float64)
    scratch = np.empty_like(acc)
    for di, dj, weight in taps:
        np.multiply(padded[..., pad + di : pad + di + h, pad + dj : pad + dj + w], weight, out=scratch)
        acc += scratch
    return acc


def _dilate8(mask: np.ndarray) -> np.ndarray:
    lead = mask.ndim - 2
    h, w = mask.shape[-2], mask.shape[-1]
    p = np.pad(mask, [(0, 0)] * lead + [(1, 1), (1, 1)], constant_values=False)
    out = mask.copy()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            out |= p[..., 1 + di : 1 + di + h, 1 + dj : 1 + dj + w]
    return out


def canny_mask(gray: np.ndarray, params: CannyParams = CannyParams()) -> np.ndarray:
    """Boolean edge mask for a gray image or stack of them (..., H, W)."""
    gray = gray.astype(np.float64, copy=False)
    h, w = gray.shape[-2], gray.shape[-1]
    k = params.kernel_size
    if h < k or w < k:
        raise RegionTooSmall(f"{w}x{h} region below {k}x{k} blur support")

    blurred = _correlate_clamp(gray, gaussian_taps(params.sigma, k), k // 2)
    gx = _correlate_clamp(blurred, SOBEL_X_TAPS, 1)
    gy = _correlate_clamp(blurred, SOBEL_Y_TAPS, 1)
    mag = np.sqrt(gx * gx + gy * gy)

    # scale so each image's max magnitude is 255
    lead_axes = tuple(range(gray.ndim - 2))
    mag_max = mag.max(axis=(-2, -1), keepdims=True) if lead_axes else np.array(mag.max())
    scale = np.where(mag_max > 0.0, 255.0 / np.where(mag_max > 0.0, mag_max, 1.0), 0.0)
    norm = mag * scale

    # direction bins without trig: compare |gy| against tan thresholds * |gx|
    a, b = np.abs(gx), np.abs(gy)
    horiz = b <= TAN_22_5 * a
    diag = ~horiz & (b < TAN_67_5 * a)
    vert = ~horiz & ~diag
    same_sign = (gx >= 0.0) == (gy >= 0.0)

    mp = np.pad(norm, [(0, 0)] * (gray.ndim - 2) + [(1, 1), (1, 1)], constant_values=0.0)
    c = norm
    left_ = mp[..., 1 : 1 + h, 0:w]
    right_ = mp[..., 1 : 1 + h, 2 : 2 + w]
    up_ = mp[..., 0:h, 1 : 1 + w]
    down_ = mp[..., 2 : 2 + h, 1 : 1 + w]
    ul_ = mp[..., 0:h, 0:w]
    dr_ = mp[..., 2 : 2 + h, 2 : 2 + w]
    ur_ = mp[..., 0:h, 2 : 2 + w]
    dl_ = mp[..., 2 : 2 + h, 0:w]

    keep = (
        (horiz & (c >= left_) & (c >= right_))
        | (diag & same_sign & (c >= ul_) & (c >= dr_))
        | (diag & ~same_sign & (c >= ur_) & (c >= dl_))
        | (vert & (c >= up_) & (c >= down_))
    )
    thinned = np.where(keep, norm, 0.0)

    strong = thinned >= params.high
    cand = thinned >= params.low
    edges = strong.copy()
    while True:
        grown = _dilate8(edges) & cand
        if np.array_equal(grown, edges):
            return edges
        edges = grown


def edge_fraction(pixels: np.ndarray, region: Region, params: CannyParams = CannyParams()) -> float:
    """Edge-pixel fraction of the region, with the detector run on the region
    itself (hence the kernel-support precondition)."""
    view = _region_view(pixels, region)
    if view.shape[0] < params.kernel_size or view.shape[1] < params.kernel_size:
        raise RegionTooSmall(
            f"region {view.shape[1]}x{view.shape[0]} below "
            f"{params.kernel_size}x{params.kernel_size}"
        )
    mask = canny_mask(rec601_luma(view), params)
    return float(mask.sum()) / mask.size


# ---------------------------------------------------------------------------
# box-region features


@dataclass(frozen=True)
class BoxFeatures:
    avg_color: tuple[float, float, float]
    luminosity: float
    edge_fraction: float
    n_boxes: int
    used_sentinel: bool


def box_region_features(
    pixels: np.ndarray, boxes: tuple[Box, ...] | list[Box], params: CannyParams = CannyParams()
) -> BoxFeatures:
    """Unweighted mean of per-box features; zero boxes fall back to the
    whole-frame values (sentinel, so downstream series have no gaps).

    Boxes below the edge detector's kernel support contribute the whole-frame
    edge fraction for their edge component.
    """
    h, w = pixels.shape[0], pixels.shape[1]
    whole = Region.whole(w, h)
    if not boxes:
        return BoxFeatures(
            avg_color=average_color(pixels, whole),
            luminosity=luminosity(pixels, whole),
            edge_fraction=edge_fraction(pixels, whole, params),
            n_boxes=0,
            used_sentinel=True,
        )
    whole_edge: float | None = None
    colors = []
    lums = []
    edges = []
    for box in boxes:
        region = Region.from_box(box)
        colors.append(average_color(pixels, region))
        lums.append(luminosity(pixels, region))
        view = _region_view(pixels, region)
        if view.shape[0] < params.kernel_size or view.shape[1] < params.kernel_size:
            if whole_edge is None:
                whole_edge = edge_fraction(pixels, whole, params)
            edges.append(whole_edge)
        else:
            edges.append(edge_fraction(pixels, region, params))
    n = len(boxes)
    color = tuple(float(sum(c[i] for c in colors)) / n for i in range(3))
    return BoxFeatures(
        avg_color=color,  # type: ignore[arg-type]
        luminosity=float(sum(lums)) / n,
        edge_fraction=float(sum(edges)) / n,
        n_boxes=n,
        used_sentinel=False,
    )


def detection_count(log: PredictionLog, frame_index: int, label: str) -> int:
    """Number of boxes with the given label in the frame."""
    return sum(1 for b in log.boxes_at(frame_index) if b.label == label)


# ---------------------------------------------------------------------------
# KPI definitions and windowed series


@dataclass(frozen=True)
class KpiDefinition:
    name: str
    lam: str
    region_kind: str = WHOLE_FRAME
    grid_row: int = 0
    grid_col: int = 0
    grid_rows: int = 4
    grid_cols: int = 4
    w: int = 1
    aggregator: str = "mean"
    source: str | None = None  # external series name for lam == "external"
    canny: CannyParams = field(default_factory=CannyParams)

    def __post_init__(self):
        if self.lam not in LAMBDAS:
            raise ValueError(f"unknown lambda {self.lam!r}")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"unknown aggregator {self.aggregator!r}")
        if self.w < 1:
            raise ValueError("window length must be >= 1")
        if self.lam == "external" and not self.source:
            raise ValueError("external lambda needs a source series name")

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "lambda": self.lam,
            "region": {"kind": self.region_kind},
            "w": self.w,
            "aggregator": self.aggregator,
        }
        if self.region_kind == GRID_CELL:
            out["region"].update(
                row=self.grid_row, col=self.grid_col, rows=self.grid_rows, cols=self.grid_cols
            )
        if self.lam == "external":
            out["source"] = self.source
        if self.lam == "edge_fraction":
            out["canny"] = {
                "sigma": self.canny.sigma,
                "kernel_size": self.canny.kernel_size,
                "low": self.canny.low,
                "high": self.canny.high,
            }
        return out

    @staticmethod
    def from_json(raw: dict) -> "KpiDefinition":
        region = raw.get("region", {"kind": WHOLE_FRAME})
        canny_raw = raw.get("canny")
        canny = CannyParams(**canny_raw) if canny_raw else CannyParams()
        return KpiDefinition(
            name=raw["name"],
            lam=raw["lambda"],
            region_kind=region.get("kind", WHOLE_FRAME),
            grid_row=region.get("row", 0),
            grid_col=region.get("col", 0),
            grid_rows=region.get("rows", 4),
            grid_cols=region.get("cols", 4),
            w=int(raw.get("w", 1)),
            aggregator=raw.get("aggregator", "mean"),
            source=raw.get("source"),
            canny=canny,
        )


@dataclass(frozen=True)
class KpiSeries:
    definition: KpiDefinition
    points: tuple[tuple[int, float], ...]  # (window_end_frame, value)
    metadata: dict = field(default_factory=dict)

    def frames(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=np.int64)

    def values(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=np.float64)


def locf_resample(series: ExternalSeries, frame_count: int) -> np.ndarray:
    """Last-observation-carried-forward onto frames 0..frame_count-1.

    Frames before the first sample take the first sample's value. An empty
    series yields an empty array.
    """
    if not series.samples:
        return np.zeros(0, dtype=np.float64)
    frames = np.array([s[0] for s in series.samples])
    values = np.array([s[1] for s in series.samples], dtype=np.float64)
    idx = np.searchsorted(frames, np.arange(frame_count), side="right") - 1
    return values[np.maximum(idx, 0)]


def _channel_index(lam: str) -> int:
    return {"avg_r": 0, "avg_g": 1, "avg_b": 2}[lam]


def _per_frame_values(
    definition: KpiDefinition,
    sequence: FrameSequence,
    pred_log: PredictionLog | None,
    gt_log: PredictionLog | None,
    externals: dict[str, ExternalSeries] | None,
) -> np.ndarray:
    manifest = sequence.manifest
    n = manifest.frame_count
    lam = definition.lam

    if lam == "external":
        externals = externals or {}
        if definition.source not in externals:
            raise UnknownExternal(definition.source or "")
        return locf_resample(externals[definition.source], n)

    if lam == "detection_count":
        if pred_log is None:
            raise ValueError("detection_count needs a prediction log")
        label = manifest.label_of_interest
        return np.array(
            [detection_count(pred_log, t, label) for t in range(n)], dtype=np.float64
        )

    if definition.region_kind in (WHOLE_FRAME, GRID_CELL):
        if definition.region_kind == WHOLE_FRAME:
            region = Region.whole(manifest.width, manifest.height)
        else:
            region = Region.grid_cell(
                manifest.width, manifest.height,
                definition.grid_row, definition.grid_col,
                definition.grid_rows, definition.grid_cols,
            )
        stack = sequence.pixel_stack()[:, region.y : region.y + region.h, region.x : region.x + region.w]
        if lam == "luminosity":
            # mean of per-pixel luma == luma of per-channel means
            means = stack.mean(axis=(1, 2), dtype=np.float64)
            return 0.299 * means[:, 0] + 0.587 * means[:, 1] + 0.114 * means[:, 2]
        if lam in ("avg_r", "avg_g", "avg_b"):
            return stack[..., _channel_index(lam)].mean(axis=(1, 2), dtype=np.float64)
        if lam == "edge_fraction":
            # chunked over frames to keep the working set cache-sized;
            # per-image normalization makes chunking exact
            gray = rec601_luma(stack)
            counts = np.concatenate(
                [
                    canny_mask(gray[i : i + 128], definition.canny).sum(axis=(1, 2))
                    for i in range(0, len(gray), 128)
                ]
            )
            return counts / float(gray.shape[1] * gray.shape[2])

    # box-region features, per frame
    log = gt_log if definition.region_kind == GT_BOXES else pred_log
    if log is None:
        raise ValueError(f"{definition.region_kind} needs the corresponding log")
    out = np.empty(n, dtype=np.float64)
    for t in range(n):
        feats = box_region_features(sequence.frames[t].pixels, log.boxes_at(t), definition.canny)
        if lam == "luminosity":
            out[t] = feats.luminosity
        elif lam == "edge_fraction":
            out[t] = feats.edge_fraction
        else:
            out[t] = feats.avg_color[_channel_index(lam)]
    return out


def _window_aggregate(values: np.ndarray, w: int, aggregator: str) -> list[tuple[int, float]]:
    n = len(values)
    fn = {"mean": np.mean, "min": np.min, "max": np.max}[aggregator]
    return [(t, float(fn(values[t - w + 1 : t + 1]))) for t in range(w - 1, n)]


def compute_kpi_series(
    definition: KpiDefinition,
    sequence: FrameSequence,
    pred_log: PredictionLog | None = None,
    gt_log: PredictionLog | None = None,
    externals: dict[str, ExternalSeries] | None = None,
) -> KpiSeries:
    """Windowed KPI series: for each frame t >= w-1, the aggregator applied to
    the per-frame feature over frames t-w+1..t (value stamped at t)."""
    per_frame = _per_frame_values(definition, sequence, pred_log, gt_log, externals)
    points = _window_aggregate(per_frame, definition.w, definition.aggregator)

    rng = LAMBDA_RANGE[definition.lam]
    if rng is not None:
        lo, hi = rng
        for t, v in points:
            assert lo <= v <= hi, f"{definition.name}@{t}: {v} outside [{lo}, {hi}]"

    metadata = {
        "definition": definition.to_json(),
        "empty_box_sentinel": "whole_frame",
    }
    return KpiSeries(definition=definition, points=tuple(points), metadata=metadata)


def default_definitions() -> list[KpiDefinition]:
    """Whole-frame KPIs registered for every project."""
    defs = [
        KpiDefinition(name="luminosity", lam="luminosity"),
        KpiDefinition(name="avg_r", lam="avg_r"),
        KpiDefinition(name="avg_g", lam="avg_g"),
        KpiDefinition(name="avg_b", lam="avg_b"),
        KpiDefinition(name="edge_fraction", lam="edge_fraction"),
        KpiDefinition(name="detection_count", lam="detection_count"),
    ]
    return defs


def with_window(definition: KpiDefinition, w: int, aggregator: str = "mean") -> KpiDefinition:
    return replace(definition, w=w, aggregator=aggregator)

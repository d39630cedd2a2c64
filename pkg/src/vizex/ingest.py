"""Project loading: manifests, frame sequences, detection logs, external series.

On-disk layout of a project directory:

    manifest.json
    frames/               frame files named by the manifest's frame_pattern
    logs/predictions.jsonl
    logs/ground_truth.jsonl
    series/*.csv          external sensor series and exported KPI series
    results/*.json        scan results, evidence, query results

Frames are binary PPM (P6) or PGM (P5, expanded to gray RGB). All loaded
structures are immutable after load and safe to share across readers.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateFrame,
    FrameOutOfRange,
    MalformedImage,
    MalformedManifest,
    MalformedRecord,
    MalformedRow,
    MissingFrame,
)

PREDICTION = "prediction"
GROUND_TRUTH = "ground_truth"


@dataclass(frozen=True)
class Manifest:
    width: int
    height: int
    frame_count: int
    fps: float = 1.0
    frame_pattern: str = "frames/%06d.ppm"
    label_of_interest: str = "person"

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise MalformedManifest(f"bad dimensions {self.width}x{self.height}")
        if self.frame_count < 1:
            raise MalformedManifest("frame_count must be >= 1")
        if self.fps <= 0:
            raise MalformedManifest("fps must be positive")

    def frame_path(self, root: Path, index: int) -> Path:
        try:
            rel = self.frame_pattern % index
        except (TypeError, ValueError) as exc:
            raise MalformedManifest(f"bad frame_pattern {self.frame_pattern!r}") from exc
        return root / rel


@dataclass(frozen=True)
class Frame:
    index: int
    pixels: np.ndarray  # (H, W, 3) uint8, row-major RGB

    def __post_init__(self):
        self.pixels.setflags(write=False)


@dataclass(frozen=True)
class FrameSequence:
    manifest: Manifest
    frames: tuple[Frame, ...]

    def __len__(self) -> int:
        return len(self.frames)

    def pixel_stack(self) -> np.ndarray:
        """All frames as one (T, H, W, 3) uint8 array."""
        return np.stack([f.pixels for f in self.frames])


@dataclass(frozen=True)
class Box:
    x: int
    y: int
    w: int
    h: int
    label: str
    score: float = 1.0

    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def area(self) -> int:
        return self.w * self.h


@dataclass(frozen=True)
class PredictionLog:
    frame_count: int
    boxes: tuple[tuple[Box, ...], ...]  # index = frame
    provenance: str = PREDICTION

    def boxes_at(self, frame_index: int) -> tuple[Box, ...]:
        return self.boxes[frame_index]


@dataclass(frozen=True)
class ExternalSeries:
    name: str
    samples: tuple[tuple[int, float], ...]  # (frame_index, value), strictly increasing


def _parse_fps(raw) -> float:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return float(raw)
    if isinstance(raw, str):
        try:
            return float(Fraction(raw))
        except (ValueError, ZeroDivisionError) as exc:
            raise MalformedManifest(f"bad fps {raw!r}") from exc
    raise MalformedManifest(f"bad fps {raw!r}")


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise MalformedManifest(f"no manifest at {path}")
    except json.JSONDecodeError as exc:
        raise MalformedManifest(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise MalformedManifest("manifest must be a JSON object")
    try:
        return Manifest(
            width=int(raw["width"]),
            height=int(raw["height"]),
            frame_count=int(raw["frame_count"]),
            fps=_parse_fps(raw.get("fps", 1)),
            frame_pattern=str(raw.get("frame_pattern", "frames/%06d.ppm")),
            label_of_interest=str(raw.get("label_of_interest", "person")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedManifest(str(exc)) from exc


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    payload = {
        "width": manifest.width,
        "height": manifest.height,
        "frame_count": manifest.frame_count,
        "fps": manifest.fps,
        "frame_pattern": manifest.frame_pattern,
        "label_of_interest": manifest.label_of_interest,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


# ---------------------------------------------------------------------------
# PPM / PGM codec

_MAGIC = {b"P6": 3, b"P5": 1}
_WS = re.compile(rb"\s")


def _read_header_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comments
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
        elif _WS.match(c):
            pos += 1
        else:
            break
    start = pos
    while pos < n and not _WS.match(buf[pos : pos + 1]):
        pos += 1
    if start == pos:
        raise ValueError("truncated header")
    return buf[start:pos], pos


def decode_netpbm(data: bytes, path: str = "<bytes>") -> np.ndarray:
    """Decode a binary PPM (P6) or PGM (P5) into an (H, W, 3) uint8 array.

    Gray images are expanded to RGB. Maxval must fit 8 bits.
    """
    try:
        magic, pos = _read_header_token(data, 0)
        if magic not in _MAGIC:
            raise ValueError(f"unsupported magic {magic!r}")
        channels = _MAGIC[magic]
        w_tok, pos = _read_header_token(data, pos)
        h_tok, pos = _read_header_token(data, pos)
        max_tok, pos = _read_header_token(data, pos)
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
        if width < 1 or height < 1:
            raise ValueError("non-positive dimensions")
        if not (0 < maxval < 256):
            raise ValueError(f"maxval {maxval} not 8-bit")
        pos += 1  # single whitespace byte after maxval
        need = width * height * channels
        raster = data[pos : pos + need]
        if len(raster) != need:
            raise ValueError(f"raster has {len(raster)} bytes, need {need}")
        arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)
        if channels == 1:
            arr = np.repeat(arr, 3, axis=2)
        return arr.copy()
    except ValueError as exc:
        raise MalformedImage(path, str(exc)) from exc


def encode_ppm(pixels: np.ndarray) -> bytes:
    """Encode an (H, W, 3) uint8 array as binary PPM (P6)."""
    h, w, c = pixels.shape
    assert c == 3
    header = f"P6\n{w} {h}\n255\n".encode()
    return header + np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()


def load_frame_sequence(manifest_path: str | Path) -> FrameSequence:
    """Load every frame named by the manifest; all-or-nothing.

    Raises MissingFrame, DimensionMismatch, MalformedImage, MalformedManifest.
    """
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    root = manifest_path.parent

    paths = [manifest.frame_path(root, i) for i in range(manifest.frame_count)]
    if len(set(paths)) != manifest.frame_count:
        raise MalformedManifest("frame_pattern does not yield distinct paths")

    frames = []
    for i, p in enumerate(paths):
        if not p.is_file():
            raise MissingFrame(i, str(p))
        pixels = decode_netpbm(p.read_bytes(), str(p))
        got = (pixels.shape[1], pixels.shape[0])
        want = (manifest.width, manifest.height)
        if got != want:
            raise DimensionMismatch(i, got, want)
        frames.append(Frame(index=i, pixels=pixels))
    return FrameSequence(manifest=manifest, frames=tuple(frames))


# ---------------------------------------------------------------------------
# detection / ground-truth logs (JSON Lines)


def _clip_box(raw: dict, manifest: Manifest, line_no: int, force_score: float | None) -> Box:
    try:
        x, y = int(raw["x"]), int(raw["y"])
        w, h = int(raw["w"]), int(raw["h"])
        label = str(raw["label"])
        score = 1.0 if force_score is not None else float(raw.get("score", 1.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(line_no, f"bad box: {exc}") from exc
    if w <= 0 or h <= 0:
        raise MalformedRecord(line_no, f"non-positive box extent {w}x{h}")
    if not (0.0 <= score <= 1.0):
        raise MalformedRecord(line_no, f"score {score} outside [0,1]")
    # clip to frame bounds; a box entirely outside has no valid clipped form
    x0, y0 = max(x, 0), max(y, 0)
    x1, y1 = min(x + w, manifest.width), min(y + h, manifest.height)
    if x0 >= x1 or y0 >= y1:
        raise MalformedRecord(line_no, "box entirely outside frame")
    return Box(x=x0, y=y0, w=x1 - x0, h=y1 - y0, label=label, score=score)


def _load_log(path: str | Path, manifest: Manifest, provenance: str) -> PredictionLog:
    force = 1.0 if provenance == GROUND_TRUTH else None
    per_frame: list[list[Box]] = [[] for _ in range(manifest.frame_count)]
    with open(path, "r") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                frame = int(rec["frame"])
                raw_boxes = rec.get("boxes", [])
                if not isinstance(raw_boxes, list):
                    raise TypeError("boxes must be a list")
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MalformedRecord(line_no, str(exc)) from exc
            if not (0 <= frame < manifest.frame_count):
                raise FrameOutOfRange(line_no, frame, manifest.frame_count)
            for raw in raw_boxes:
                if not isinstance(raw, dict):
                    raise MalformedRecord(line_no, "box must be an object")
                per_frame[frame].append(_clip_box(raw, manifest, line_no, force))
    return PredictionLog(
        frame_count=manifest.frame_count,
        boxes=tuple(tuple(bs) for bs in per_frame),
        provenance=provenance,
    )


def load_detection_log(path: str | Path, manifest: Manifest) -> PredictionLog:
    """Frames absent from the file get empty box lists (zero detections)."""
    return _load_log(path, manifest, PREDICTION)


def load_ground_truth(path: str | Path, manifest: Manifest) -> PredictionLog:
    """As load_detection_log, but provenance ground_truth and scores forced to 1.0."""
    return _load_log(path, manifest, GROUND_TRUTH)


def write_log(log: PredictionLog, path: str | Path) -> None:
    """Write one record per frame (empty frames included, for exact round-trips)."""
    with open(path, "w") as fh:
        for frame, boxes in enumerate(log.boxes):
            rec = {
                "frame": frame,
                "boxes": [
                    {"x": b.x, "y": b.y, "w": b.w, "h": b.h, "label": b.label, "score": b.score}
                    for b in boxes
                ],
            }
            fh.write(json.dumps(rec) + "\n")


# ---------------------------------------------------------------------------
# external series (CSV)


def load_external_series(path: str | Path, name: str) -> ExternalSeries:
    """Two-column CSV with header `frame,value`; duplicate frames rejected."""
    samples: list[tuple[int, float]] = []
    seen: set[int] = set()
    with open(path, "r") as fh:
        header = fh.readline()
        if [c.strip() for c in header.strip().split(",")] != ["frame", "value"]:
            raise MalformedRow(1, f"header must be 'frame,value', got {header.strip()!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise MalformedRow(line_no, "expected two columns")
            try:
                frame, value = int(parts[0]), float(parts[1])
            except ValueError as exc:
                raise MalformedRow(line_no, str(exc)) from exc
            if frame in seen:
                raise DuplicateFrame(frame)
            seen.add(frame)
            samples.append((frame, value))
    samples.sort()
    return ExternalSeries(name=name, samples=tuple(samples))


def write_series_csv(points: list[tuple[int, float]], path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("frame,value\n")
        for frame, value in points:
            fh.write(f"{frame},{value!r}\n")


# ---------------------------------------------------------------------------
# project directory


@dataclass
class ProjectDir:
    """Resolved paths inside a project directory."""

    root: Path
    manifest: Path = field(init=False)
    predictions: Path = field(init=False)
    ground_truth: Path = field(init=False)
    series_dir: Path = field(init=False)
    results_dir: Path = field(init=False)

    def __post_init__(self):
        self.root = Path(self.root)
        self.manifest = self.root / "manifest.json"
        self.predictions = self.root / "logs" / "predictions.jsonl"
        self.ground_truth = self.root / "logs" / "ground_truth.jsonl"
        self.series_dir = self.root / "series"
        self.results_dir = self.root / "results"

    def make_dirs(self) -> None:
        (self.root / "frames").mkdir(parents=True, exist_ok=True)
        (self.root / "logs").mkdir(exist_ok=True)
        self.series_dir.mkdir(exist_ok=True)
        self.results_dir.mkdir(exist_ok=True)

    def external_series_paths(self) -> list[Path]:
        if not self.series_dir.is_dir():
            return []
        return sorted(p for p in self.series_dir.glob("*.csv"))

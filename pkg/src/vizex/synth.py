"""Synthetic scenario lab: projects with planted causal structure.

Scenes are gray backgrounds with bright rectangles ("people") moving on
seeded paths. Lighting events step the background level; the detector model
detects each true box with a probability set by the local background level
(above/below the luminosity knee) or by a spatial failure zone. Detection
outcomes persist per person between re-rolls (failure states dwell longer
than success churn, and every regime change forces a re-roll), which is what
makes planted cuts sharp.

In lane motion all people share one brightness and keep >= 6 px of vertical
clearance, so the edge mask is exactly translation-invariant frame to frame:
edge_fraction is constant by construction and serves as the guaranteed
discontinuity-free confound KPI.

Everything is driven by counter-based Philox streams: byte-identical output
for a given seed, independent streams across seeds.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidSpec
from .ingest import (
    Box,
    Frame,
    FrameSequence,
    Manifest,
    PredictionLog,
    ProjectDir,
    encode_ppm,
    write_log,
    write_manifest,
)
from .project import EngineConfig, Project

LUMINOSITY_BACKGROUND = "luminosity_background"
NONE_EVENT = "none"


@dataclass(frozen=True)
class StepEvent:
    frame: int
    feature: str = LUMINOSITY_BACKGROUND  # luminosity_background | none
    magnitude: float = 0.0  # gray levels, signed
    ramp_frames: int = 0  # 0 = instantaneous


@dataclass(frozen=True)
class DetectorModel:
    base_detect_prob: float = 0.95
    luminosity_knee: float = 90.0
    degraded_detect_prob: float = 0.45
    false_positive_rate: float = 0.02  # expected false positives per frame


@dataclass(frozen=True)
class FailureZone:
    row: int
    col: int
    rows: int = 4
    cols: int = 4
    detect_prob: float = 0.05


@dataclass(frozen=True)
class PeopleSpec:
    count: int = 5
    brightness: int = 220
    brightness_spread: int = 0  # per-person brightness varies +/- this much
    height: int = 5
    min_width: int = 10
    max_width: int = 12
    motion: str = "lanes"  # lanes | bounce2d
    speed_min: float = 0.2
    speed_max: float = 0.6
    margin: int = 4
    good_period: int = 12  # frames between re-rolls while detecting well
    degraded_period: int = 80  # dwell of failure states
    jitter: int = 1  # detected-box position jitter in px


@dataclass(frozen=True)
class ScenarioSpec:
    frame_count: int
    width: int = 64
    height: int = 64
    seed: int = 0
    background_level: float = 140.0
    events: tuple[StepEvent, ...] = ()
    detector: DetectorModel = field(default_factory=DetectorModel)
    people: PeopleSpec = field(default_factory=PeopleSpec)
    zones: tuple[FailureZone, ...] = ()
    noise_sigma: float = 2.0  # per-frame scalar background noise
    pixel_noise_sigma: float = 0.0  # per-pixel sensor noise (breaks edge constancy)
    edge_margin: int = 50  # events must sit this far from both ends
    label: str = "person"

    def validate(self) -> None:
        if self.frame_count < 1 or self.width < 20 or self.height < 20:
            raise InvalidSpec(f"bad scene dimensions {self.width}x{self.height}x{self.frame_count}")
        d = self.detector
        for p in (d.base_detect_prob, d.degraded_detect_prob, *(z.detect_prob for z in self.zones)):
            if not (0.0 <= p <= 1.0):
                raise InvalidSpec(f"probability {p} outside [0,1]")
        if d.degraded_detect_prob > d.base_detect_prob:
            raise InvalidSpec("degraded_detect_prob must not exceed base_detect_prob")
        if d.false_positive_rate < 0:
            raise InvalidSpec("false_positive_rate must be >= 0")
        for ev in self.events:
            if ev.feature not in (LUMINOSITY_BACKGROUND, NONE_EVENT):
                raise InvalidSpec(f"unknown event feature {ev.feature!r}")
            if ev.feature != NONE_EVENT and ev.magnitude == 0:
                raise InvalidSpec("non-null events need magnitude != 0")
            if not (self.edge_margin < ev.frame < self.frame_count - self.edge_margin):
                raise InvalidSpec(
                    f"event frame {ev.frame} outside ({self.edge_margin}, "
                    f"{self.frame_count - self.edge_margin})"
                )
        if self.noise_sigma < 0 or self.pixel_noise_sigma < 0:
            raise InvalidSpec("noise sigmas must be >= 0")

    def to_json(self) -> dict:
        return {
            "frame_count": self.frame_count,
            "width": self.width,
            "height": self.height,
            "seed": self.seed,
            "background_level": self.background_level,
            "events": [
                {"frame": e.frame, "feature": e.feature, "magnitude": e.magnitude,
                 "ramp_frames": e.ramp_frames}
                for e in self.events
            ],
            "detector": {
                "base_detect_prob": self.detector.base_detect_prob,
                "luminosity_knee": self.detector.luminosity_knee,
                "degraded_detect_prob": self.detector.degraded_detect_prob,
                "false_positive_rate": self.detector.false_positive_rate,
            },
            "people": {
                "count": self.people.count,
                "brightness": self.people.brightness,
                "brightness_spread": self.people.brightness_spread,
                "height": self.people.height,
                "min_width": self.people.min_width,
                "max_width": self.people.max_width,
                "motion": self.people.motion,
                "speed_min": self.people.speed_min,
                "speed_max": self.people.speed_max,
                "margin": self.people.margin,
                "good_period": self.people.good_period,
                "degraded_period": self.people.degraded_period,
                "jitter": self.people.jitter,
            },
            "zones": [
                {"row": z.row, "col": z.col, "rows": z.rows, "cols": z.cols,
                 "detect_prob": z.detect_prob}
                for z in self.zones
            ],
            "noise_sigma": self.noise_sigma,
            "pixel_noise_sigma": self.pixel_noise_sigma,
            "edge_margin": self.edge_margin,
            "label": self.label,
        }

    @staticmethod
    def from_json(raw: dict) -> "ScenarioSpec":
        return ScenarioSpec(
            frame_count=int(raw["frame_count"]),
            width=int(raw.get("width", 64)),
            height=int(raw.get("height", 64)),
            seed=int(raw.get("seed", 0)),
            background_level=float(raw.get("background_level", 140.0)),
            events=tuple(
                StepEvent(
                    frame=int(e["frame"]),
                    feature=e.get("feature", LUMINOSITY_BACKGROUND),
                    magnitude=float(e.get("magnitude", 0.0)),
                    ramp_frames=int(e.get("ramp_frames", 0)),
                )
                for e in raw.get("events", [])
            ),
            detector=DetectorModel(**raw.get("detector", {})),
            people=PeopleSpec(**raw.get("people", {})),
            zones=tuple(FailureZone(**z) for z in raw.get("zones", [])),
            noise_sigma=float(raw.get("noise_sigma", 2.0)),
            pixel_noise_sigma=float(raw.get("pixel_noise_sigma", 0.0)),
            edge_margin=int(raw.get("edge_margin", 50)),
            label=raw.get("label", "person"),
        )


@dataclass(frozen=True)
class PlantedPair:
    kpi_name: str
    metric_name: str
    cut_frame: int
    expected_sign: str  # rising | falling


@dataclass(frozen=True)
class PlantedTruth:
    pairs: tuple[PlantedPair, ...]
    null_kpis: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "pairs": [
                {"kpi": p.kpi_name, "metric": p.metric_name, "cut_frame": p.cut_frame,
                 "expected_sign": p.expected_sign}
                for p in self.pairs
            ],
            "null_kpis": list(self.null_kpis),
        }


@dataclass
class Scenario:
    spec: ScenarioSpec
    sequence: FrameSequence
    gt_log: PredictionLog
    pred_log: PredictionLog
    truth: PlantedTruth

    def project(self, config: EngineConfig = EngineConfig(), name: str = "scene") -> Project:
        return Project(
            sequence=self.sequence,
            pred_log=self.pred_log,
            gt_log=self.gt_log,
            config=config,
            name=name,
        )


def _rng_for(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))
    )


def _triangle(pos: float, lo: float, hi: float) -> float:
    span = hi - lo
    if span <= 0:
        return lo
    p = pos % (2.0 * span)
    return lo + (p if p <= span else 2.0 * span - p)


def _background_levels(spec: ScenarioSpec) -> np.ndarray:
    t = np.arange(spec.frame_count, dtype=np.float64)
    level = np.full(spec.frame_count, spec.background_level)
    for ev in spec.events:
        if ev.feature != LUMINOSITY_BACKGROUND:
            continue
        if ev.ramp_frames <= 0:
            level += np.where(t >= ev.frame, ev.magnitude, 0.0)
        else:
            ramp = np.clip((t - ev.frame) / ev.ramp_frames, 0.0, 1.0)
            level += ev.magnitude * ramp
    return level


def _cell_of_point(cx: float, cy: float, width: int, height: int, rows: int, cols: int):
    return min(int(cy * rows / height), rows - 1), min(int(cx * cols / width), cols - 1)


def build_scenario(spec: ScenarioSpec) -> Scenario:
    """Render the scene and simulate the detector, entirely in memory."""
    spec.validate()
    people = spec.people
    det = spec.detector
    n, w, h = spec.frame_count, spec.width, spec.height

    rng = _rng_for(spec.seed, 0)

    # person geometry and paths
    k = people.count
    widths = [int(rng.integers(people.min_width, people.max_width + 1)) for _ in range(k)]
    spread = people.brightness_spread
    brightnesses = [
        people.brightness + (int(rng.integers(-spread, spread + 1)) if spread else 0)
        for _ in range(k)
    ]
    if people.motion == "lanes":
        # clearance must exceed the edge detector's reach (blur 2 + sobel 1 +
        # non-max lookahead 1 per side) so lane edge masks never interact and
        # the edge fraction stays exactly translation-invariant
        gap = (h - 2 * people.margin - k * people.height) // max(k - 1, 1) if k > 1 else 0
        if k > 1 and gap < 7:
            raise InvalidSpec("people do not fit in disjoint lanes with 7 px clearance")
        lane_y = [people.margin + i * (people.height + gap) for i in range(k)]
    elif people.motion == "bounce2d":
        lane_y = [0] * k  # replaced by per-frame paths below
    else:
        raise InvalidSpec(f"unknown motion {people.motion!r}")
    speeds_x = [float(rng.uniform(people.speed_min, people.speed_max)) for _ in range(k)]
    phases_x = [float(rng.uniform(0, 2 * w)) for _ in range(k)]
    speeds_y = [float(rng.uniform(people.speed_min, people.speed_max)) for _ in range(k)]
    phases_y = [float(rng.uniform(0, 2 * h)) for _ in range(k)]
    roll_phases = [int(rng.integers(0, people.good_period)) for _ in range(k)]

    def person_box(i: int, t: int) -> Box:
        lo_x, hi_x = people.margin, w - widths[i] - people.margin
        x = int(_triangle(phases_x[i] + speeds_x[i] * t, lo_x, hi_x))
        if people.motion == "lanes":
            y = lane_y[i]
        else:
            lo_y, hi_y = people.margin, h - people.height - people.margin
            y = int(_triangle(phases_y[i] + speeds_y[i] * t, lo_y, hi_y))
        return Box(x=x, y=y, w=widths[i], h=people.height, label=spec.label, score=1.0)

    # background with per-frame scalar noise, quantized to 8 bits
    levels = _background_levels(spec)
    noise = rng.normal(0.0, spec.noise_sigma, size=n) if spec.noise_sigma > 0 else np.zeros(n)
    bg_px = np.clip(np.rint(levels + noise), 0, 255).astype(np.uint8)

    # render frames; each person gets asymmetric rim shades so no two edge
    # pixels tie exactly in the non-max suppression stage (exact ties on
    # straight edges would flip with per-frame rounding noise and make the
    # edge-fraction series flutter instead of staying constant)
    stack = np.empty((n, h, w, 3), dtype=np.uint8)
    gt_boxes: list[tuple[Box, ...]] = []
    pixel_rng = _rng_for(spec.seed, 2)
    for t in range(n):
        if spec.pixel_noise_sigma > 0:
            plane = np.clip(
                np.rint(float(bg_px[t]) + pixel_rng.normal(0.0, spec.pixel_noise_sigma, size=(h, w))),
                0, 255,
            ).astype(np.uint8)
            stack[t] = plane[:, :, None]
        else:
            stack[t] = bg_px[t]
        boxes = tuple(person_box(i, t) for i in range(k))
        for i, b in enumerate(boxes):
            bright = brightnesses[i]
            stack[t, b.y : b.y + b.h, b.x : b.x + b.w, :] = bright
            stack[t, b.y, b.x : b.x + b.w, :] = bright - 50
            stack[t, b.y + b.h - 1, b.x : b.x + b.w, :] = bright - 30
            stack[t, b.y : b.y + b.h, b.x, :] = bright - 40
            stack[t, b.y : b.y + b.h, b.x + b.w - 1, :] = bright - 15
        gt_boxes.append(boxes)

    # detector simulation with persistent per-person states
    det_rng = _rng_for(spec.seed, 1)
    states = [True] * k
    prev_prob = [None] * k
    pred_boxes: list[tuple[Box, ...]] = []
    for t in range(n):
        frame_boxes: list[Box] = []
        boxes = gt_boxes[t]
        for i, b in enumerate(boxes):
            cx, cy = b.center()
            prob = det.base_detect_prob if bg_px[t] >= det.luminosity_knee else det.degraded_detect_prob
            for z in spec.zones:
                if _cell_of_point(cx, cy, w, h, z.rows, z.cols) == (z.row, z.col):
                    prob = z.detect_prob
                    break
            period = people.good_period if prob >= 0.5 else people.degraded_period
            reroll = (
                t == 0
                or prob != prev_prob[i]
                or (t + roll_phases[i]) % period == 0
            )
            prev_prob[i] = prob
            if reroll:
                states[i] = bool(det_rng.random() < prob)
            if states[i]:
                jx = int(det_rng.integers(-people.jitter, people.jitter + 1)) if people.jitter else 0
                jy = int(det_rng.integers(-people.jitter, people.jitter + 1)) if people.jitter else 0
                x = min(max(b.x + jx, 0), w - b.w)
                y = min(max(b.y + jy, 0), h - b.h)
                frame_boxes.append(
                    Box(x=x, y=y, w=b.w, h=b.h, label=spec.label,
                        score=round(float(det_rng.uniform(0.6, 0.99)), 4))
                )
        # false positives are double detections of real objects (the common
        # detector failure), so their pixels look like any other detection
        n_fp = int(det_rng.poisson(det.false_positive_rate))
        for _ in range(n_fp):
            b = boxes[int(det_rng.integers(0, k))]
            jx = int(det_rng.integers(-2, 3))
            jy = int(det_rng.integers(-2, 3))
            frame_boxes.append(
                Box(x=min(max(b.x + jx, 0), w - b.w), y=min(max(b.y + jy, 0), h - b.h),
                    w=b.w, h=b.h, label=spec.label,
                    score=round(float(det_rng.uniform(0.3, 0.7)), 4))
            )
        pred_boxes.append(tuple(frame_boxes))

    manifest = Manifest(
        width=w, height=h, frame_count=n, fps=1.0,
        frame_pattern="frames/%06d.ppm", label_of_interest=spec.label,
    )
    sequence = FrameSequence(
        manifest=manifest,
        frames=tuple(Frame(index=t, pixels=stack[t]) for t in range(n)),
    )
    gt_log = PredictionLog(frame_count=n, boxes=tuple(gt_boxes), provenance="ground_truth")
    pred_log = PredictionLog(frame_count=n, boxes=tuple(pred_boxes), provenance="prediction")

    pairs = tuple(
        PlantedPair(
            kpi_name="luminosity",
            metric_name="count_error",
            cut_frame=ev.frame,
            expected_sign="falling" if ev.magnitude < 0 else "rising",
        )
        for ev in spec.events
        if ev.feature == LUMINOSITY_BACKGROUND
    )
    truth = PlantedTruth(pairs=pairs, null_kpis=("edge_fraction",))
    return Scenario(spec=spec, sequence=sequence, gt_log=gt_log, pred_log=pred_log, truth=truth)


def generate_scenario(spec: ScenarioSpec, out_dir: str | Path) -> tuple[Path, PlantedTruth]:
    """Build the scenario and write a complete ingest-compatible project."""
    scenario = build_scenario(spec)
    root = Path(out_dir)
    layout = ProjectDir(root)
    layout.make_dirs()
    write_manifest(scenario.sequence.manifest, layout.manifest)
    for frame in scenario.sequence.frames:
        path = scenario.sequence.manifest.frame_path(root, frame.index)
        path.write_bytes(encode_ppm(frame.pixels))
    write_log(scenario.pred_log, layout.predictions)
    write_log(scenario.gt_log, layout.ground_truth)
    (root / "planted_truth.json").write_text(
        json.dumps(scenario.truth.to_json(), indent=2, sort_keys=True) + "\n"
    )
    (root / "scenario.json").write_text(
        json.dumps(spec.to_json(), indent=2, sort_keys=True) + "\n"
    )
    return root, scenario.truth


# ---------------------------------------------------------------------------
# canonical scenarios


def lighting_scenario(seed: int, frame_count: int = 2000) -> ScenarioSpec:
    """The light-switch scene: background 140 -> 60 at the midpoint, detector
    knee at 90 with base 0.95 / degraded 0.45."""
    return ScenarioSpec(
        frame_count=frame_count,
        seed=seed,
        background_level=140.0,
        events=(StepEvent(frame=frame_count // 2, magnitude=-80.0),),
        detector=DetectorModel(
            base_detect_prob=0.95,
            luminosity_knee=90.0,
            degraded_detect_prob=0.45,
            false_positive_rate=0.01,
        ),
        people=PeopleSpec(count=5),
        noise_sigma=2.0,
    )


def zone_scenario(
    seed: int,
    zone_cell: tuple[int, int],
    frame_count: int = 600,
    background_level: float = 140.0,
) -> ScenarioSpec:
    """Spatially localized failure: detection collapses inside one grid cell."""
    return ScenarioSpec(
        frame_count=frame_count,
        seed=seed,
        background_level=background_level,
        events=(),
        detector=DetectorModel(
            base_detect_prob=0.98,
            luminosity_knee=90.0,
            degraded_detect_prob=0.98,
            false_positive_rate=0.02,
        ),
        people=PeopleSpec(
            count=2, motion="bounce2d", brightness_spread=25,
            good_period=1, degraded_period=1,
        ),
        zones=(FailureZone(row=zone_cell[0], col=zone_cell[1], detect_prob=0.02),),
        noise_sigma=2.0,
        pixel_noise_sigma=8.0,
    )


# ---------------------------------------------------------------------------
# recovery scoring and batteries


@dataclass(frozen=True)
class RecoveryReport:
    hits: int
    top_hits: int
    n_pairs: int
    false_alarms: tuple[str, ...]  # null KPIs named by any window

    @property
    def hit_rate(self) -> float:
        return self.hits / self.n_pairs if self.n_pairs else 0.0

    @property
    def false_alarm(self) -> bool:
        return len(self.false_alarms) > 0


def score_recovery(truth: PlantedTruth, result, tolerance_frames: int) -> RecoveryReport:
    """Hit: some window contains the true cut within tolerance and names the
    true KPI. Top hit: the top-ranked window does. False alarm: any window
    names a null KPI."""
    hits = top_hits = 0
    for pair in truth.pairs:
        def window_matches(window) -> bool:
            names = {name for name, _ in window.matched_atoms}
            return (
                pair.kpi_name in names
                and window.start_frame - tolerance_frames <= pair.cut_frame <= window.end_frame + tolerance_frames
            )

        if any(window_matches(w) for w in result.windows):
            hits += 1
        if result.windows and window_matches(result.windows[0]):
            top_hits += 1
    alarms = tuple(
        sorted(
            {
                name
                for w in result.windows
                for name, _ in w.matched_atoms
                if name in truth.null_kpis
            }
        )
    )
    return RecoveryReport(hits=hits, top_hits=top_hits, n_pairs=len(truth.pairs), false_alarms=alarms)


@dataclass(frozen=True)
class BatteryReport:
    n_seeds: int
    top_hits: int
    any_hits: int
    seeds_with_windows: int
    elapsed_seconds: float

    def to_json(self) -> dict:
        return {
            "n_seeds": self.n_seeds,
            "top_hits": self.top_hits,
            "any_hits": self.any_hits,
            "seeds_with_windows": self.seeds_with_windows,
            "elapsed_seconds": self.elapsed_seconds,
        }


def run_query_battery(
    spec_for_seed,
    query_text: str,
    n_seeds: int,
    tolerance_frames: int = 20,
    config: EngineConfig = EngineConfig(),
) -> BatteryReport:
    """Generate scenario per seed, run the query, score recovery on each."""
    from .query import execute, parse

    ast = parse(query_text)
    top_hits = any_hits = with_windows = 0
    started = time.perf_counter()
    for seed in range(n_seeds):
        scenario = build_scenario(spec_for_seed(seed))
        project = scenario.project(config)
        result = execute(ast, project, config)
        if result.windows:
            with_windows += 1
        report = score_recovery(scenario.truth, result, tolerance_frames)
        if report.n_pairs:
            if report.hits == report.n_pairs:
                any_hits += 1
            if report.top_hits == report.n_pairs:
                top_hits += 1
    return BatteryReport(
        n_seeds=n_seeds,
        top_hits=top_hits,
        any_hits=any_hits,
        seeds_with_windows=with_windows,
        elapsed_seconds=time.perf_counter() - started,
    )

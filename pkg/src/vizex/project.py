"""In-memory project snapshot: manifest, frames, logs, series registry.

A Project resolves KPI and metric names to computed series, caching results.
Snapshots are immutable once loaded; on-demand series computation is
deduplicated behind a lock so concurrent identical requests compute once.
Metric names: `count_error` (per-frame error class), `correct_rate` (windowed
fraction of correct frames), plus any external series served as custom
metrics. KPI names: the registered definitions plus external series.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import UnknownKpi, UnknownMetric
from .ingest import (
    ExternalSeries,
    FrameSequence,
    PredictionLog,
    ProjectDir,
    load_detection_log,
    load_external_series,
    load_frame_sequence,
    load_ground_truth,
    write_series_csv,
)
from .kpi import KpiDefinition, KpiSeries, compute_kpi_series, default_definitions
from .metrics import CUSTOM, MetricSeries, correct_rate, error_series

COUNT_ERROR = "count_error"
CORRECT_RATE_NAME = "correct_rate"


@dataclass(frozen=True)
class EngineConfig:
    bandwidth: int = 20
    delta: int | None = None  # None: 2x bandwidth (detector responses can lag causes)
    alpha: float = 0.05
    n_sims: int = 500
    null_seed: int = 7
    correct_rate_window: int = 20
    samples_per_window: int = 4
    # bandwidth ladder for scans; queries use the rungs up to their bandwidth
    scan_bandwidths: tuple[int, ...] = (5, 10, 20, 40)


class Project:
    def __init__(
        self,
        sequence: FrameSequence,
        pred_log: PredictionLog | None = None,
        gt_log: PredictionLog | None = None,
        externals: dict[str, ExternalSeries] | None = None,
        kpi_definitions: list[KpiDefinition] | None = None,
        root: Path | None = None,
        config: EngineConfig = EngineConfig(),
        name: str = "scene",
    ):
        self.sequence = sequence
        self.manifest = sequence.manifest
        self.pred_log = pred_log
        self.gt_log = gt_log
        self.externals = dict(externals or {})
        self.root = Path(root) if root else None
        self.config = config
        self.name = name
        defs = kpi_definitions if kpi_definitions is not None else default_definitions()
        self.kpi_definitions: dict[str, KpiDefinition] = {d.name: d for d in defs}
        self._kpi_cache: dict[str, KpiSeries] = {}
        self._metric_cache: dict[str, MetricSeries] = {}
        self._lock = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}
        self.compute_counts: dict[str, int] = {}

    # -- loading ------------------------------------------------------------

    @staticmethod
    def load(root: str | Path, config: EngineConfig = EngineConfig(),
             kpi_definitions: list[KpiDefinition] | None = None) -> "Project":
        layout = ProjectDir(Path(root))
        sequence = load_frame_sequence(layout.manifest)
        pred = load_detection_log(layout.predictions, sequence.manifest) if layout.predictions.is_file() else None
        gt = load_ground_truth(layout.ground_truth, sequence.manifest) if layout.ground_truth.is_file() else None
        externals = {}
        for path in layout.external_series_paths():
            if path.name.endswith(".meta.json"):
                continue
            name = path.stem
            externals[name] = load_external_series(path, name)
        return Project(
            sequence=sequence,
            pred_log=pred,
            gt_log=gt,
            externals=externals,
            kpi_definitions=kpi_definitions,
            root=Path(root),
            config=config,
            name=Path(root).name,
        )

    # -- name resolution ----------------------------------------------------

    def kpi_names(self) -> list[str]:
        return sorted(set(self.kpi_definitions) | set(self.externals))

    def metric_names(self) -> list[str]:
        names = []
        if self.pred_log is not None and self.gt_log is not None:
            names += [COUNT_ERROR, CORRECT_RATE_NAME]
        return sorted(set(names) | set(self.externals))

    def has_kpi(self, name: str) -> bool:
        return name in self.kpi_definitions or name in self.externals

    def has_metric(self, name: str) -> bool:
        return name in self.metric_names()

    def frame_count(self) -> int:
        return self.manifest.frame_count

    # -- series computation (deduplicated, cached) --------------------------

    def _series_lock(self, key: str) -> threading.Lock:
        with self._lock:
            if key not in self._locks:
                self._locks[key] = threading.Lock()
            return self._locks[key]

    def kpi_series(self, name: str) -> KpiSeries:
        if name in self._kpi_cache:
            return self._kpi_cache[name]
        if not self.has_kpi(name):
            raise UnknownKpi(name)
        with self._series_lock(f"kpi:{name}"):
            if name in self._kpi_cache:
                return self._kpi_cache[name]
            definition = self.kpi_definitions.get(name) or KpiDefinition(
                name=name, lam="external", source=name
            )
            series = compute_kpi_series(
                definition, self.sequence, self.pred_log, self.gt_log, self.externals
            )
            self.compute_counts[name] = self.compute_counts.get(name, 0) + 1
            self._kpi_cache[name] = series
            return series

    def metric_series(self, name: str) -> MetricSeries:
        if name in self._metric_cache:
            return self._metric_cache[name]
        if not self.has_metric(name):
            raise UnknownMetric(name)
        with self._series_lock(f"metric:{name}"):
            if name in self._metric_cache:
                return self._metric_cache[name]
            series = self._compute_metric(name)
            self.compute_counts[name] = self.compute_counts.get(name, 0) + 1
            self._metric_cache[name] = series
            return series

    def _compute_metric(self, name: str) -> MetricSeries:
        if name == COUNT_ERROR:
            return error_series(self.pred_log, self.gt_log, self.manifest.label_of_interest)
        if name == CORRECT_RATE_NAME:
            errors = self.metric_series(COUNT_ERROR)
            return correct_rate(errors, self.config.correct_rate_window)
        ext = self.externals[name]
        return MetricSeries(name=name, points=tuple((f, float(v)) for f, v in ext.samples), kind=CUSTOM)

    # -- persistence ----------------------------------------------------------

    def results_dir(self) -> Path | None:
        if self.root is None:
            return None
        out = self.root / "results"
        out.mkdir(exist_ok=True)
        return out

    def export_kpi_series(self, name: str) -> Path | None:
        """Write series/<name>.csv and its .meta.json sidecar."""
        if self.root is None:
            return None
        series = self.kpi_series(name)
        series_dir = self.root / "series"
        series_dir.mkdir(exist_ok=True)
        path = series_dir / f"{name}.csv"
        write_series_csv(list(series.points), path)
        meta = dict(series.metadata)
        (series_dir / f"{name}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return path

    def export_metric_series(self, name: str) -> Path | None:
        """Write series/<name>.csv in the same format as KPI series."""
        if self.root is None:
            return None
        series = self.metric_series(name)
        series_dir = self.root / "series"
        series_dir.mkdir(exist_ok=True)
        path = series_dir / f"{name}.csv"
        write_series_csv(list(series.points), path)
        return path

    def write_result(self, filename: str, payload) -> Path | None:
        out = self.results_dir()
        if out is None:
            return None
        path = out / filename
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        tmp.replace(path)
        return path

    def write_evidence(self, evidence: list[dict]) -> Path | None:
        return self.write_result("evidence.json", evidence)

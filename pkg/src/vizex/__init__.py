"""Causal debugging for video-analytics models.

Track low-dimensional KPI time series over frames, detect regression
discontinuities in KPIs and error metrics, associate coincident jumps as
causal evidence, and query the evidence with SELECT ... BECAUSE.
"""

from .errors import VizexError
from .ingest import (
    Box,
    ExternalSeries,
    Frame,
    FrameSequence,
    Manifest,
    PredictionLog,
    load_detection_log,
    load_external_series,
    load_frame_sequence,
    load_ground_truth,
)
from .kpi import CannyParams, KpiDefinition, KpiSeries, Region, compute_kpi_series
from .metrics import Heatmap, Matching, MetricSeries, correct_rate, error_heatmap, error_series, match_boxes
from .project import EngineConfig, Project
from .query import QueryAst, QueryResult, execute, parse, pretty_print, summarize
from .rdd import (
    AssociationEvidence,
    DiscontinuityEstimate,
    LinearFit,
    associate,
    discontinuity_at,
    local_linear_fit,
    null_threshold,
    scan_discontinuities,
)
from .surrogate import FeatureTable, TreeModel, balanced_accuracy, build_feature_table, evaluate_split, train_tree
from .synth import (
    DetectorModel,
    PlantedTruth,
    ScenarioSpec,
    StepEvent,
    build_scenario,
    generate_scenario,
    lighting_scenario,
    score_recovery,
    zone_scenario,
)

__version__ = "0.1.0"

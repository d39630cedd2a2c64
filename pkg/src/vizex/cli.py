"""Command-line entry points.

Exit codes: 0 success, 1 engine error, 2 usage error (including query syntax
errors, which carry a line/col diagnostic on stderr).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .errors import QuerySyntaxError, VizexError
from .ingest import load_frame_sequence, ProjectDir
from .kpi import KpiDefinition
from .metrics import error_heatmap, heatmap_to_json
from .project import EngineConfig, Project
from .query import execute, parse, pretty_print, summarize
from .rdd import null_threshold, scan_discontinuities
from .surrogate import build_feature_table, evaluate_split
from .synth import ScenarioSpec, generate_scenario


def _load_project(args) -> Project:
    defs = None
    if getattr(args, "config", None):
        raw = json.loads(Path(args.config).read_text())
        defs = [KpiDefinition.from_json(d) for d in raw.get("kpis", raw) if d]
        from .kpi import default_definitions

        names = {d.name for d in defs}
        defs += [d for d in default_definitions() if d.name not in names]
    return Project.load(args.project, kpi_definitions=defs)


def cmd_ingest(args) -> int:
    layout = ProjectDir(Path(args.project))
    sequence = load_frame_sequence(layout.manifest)
    project = Project.load(args.project)
    print(
        f"ok: {sequence.manifest.frame_count} frames "
        f"{sequence.manifest.width}x{sequence.manifest.height}, "
        f"kpis: {', '.join(project.kpi_names())}; "
        f"metrics: {', '.join(project.metric_names()) or 'none (missing logs)'}"
    )
    return 0


def cmd_kpi(args) -> int:
    project = _load_project(args)
    names = args.names or list(project.kpi_definitions)
    for name in names:
        path = project.export_kpi_series(name)
        series = project.kpi_series(name)
        print(f"{name}: {len(series.points)} points -> {path}")
    return 0


def cmd_eval(args) -> int:
    project = _load_project(args)
    label = project.manifest.label_of_interest
    errors = project.metric_series("count_error")
    rate = project.metric_series("correct_rate")
    over, under = error_heatmap(
        project.pred_log, project.gt_log, label,
        project.manifest.width, project.manifest.height,
        grid_rows=args.grid, grid_cols=args.grid,
    )
    project.write_result("heatmap_overcount.json", heatmap_to_json(over))
    project.write_result("heatmap_undercount.json", heatmap_to_json(under))
    values = errors.values()
    for name in ("count_error", "correct_rate"):
        project.export_metric_series(name)
    print(f"count_error: {len(errors.points)} frames, "
          f"undercount {float((values == -1).mean()):.3f}, "
          f"overcount {float((values == 1).mean()):.3f}")
    print(f"correct_rate (w={project.config.correct_rate_window}): {len(rate.points)} points")
    print(f"series CSVs -> {project.root / 'series'}; heatmaps -> {project.results_dir()}")
    return 0


def cmd_scan(args) -> int:
    project = _load_project(args)
    if project.has_kpi(args.series):
        series = project.kpi_series(args.series)
    else:
        series = project.metric_series(args.series)
    n = len(series.points)
    bandwidths = [args.bandwidth] if args.bandwidth else list(project.config.scan_bandwidths)
    results = []
    for bw in bandwidths:
        if n < 2 * bw:
            continue
        threshold = (
            args.threshold
            if args.threshold is not None
            else null_threshold(n, bw, args.alpha, project.config.n_sims, project.config.null_seed)
        )
        results.extend(
            d.to_json()
            for d in scan_discontinuities(series, bw, threshold, min_separation=bw, name=args.series)
        )
    path = project.write_result(f"rdd_{args.series}.json", results)
    print(f"{len(results)} discontinuities -> {path}")
    for d in results:
        print(f"  cut {d['cutpoint']}  tau {d['tau']:+.4g}  t {d['t_stat']:.3g}  (w={d['bandwidth']})")
    return 0


def cmd_query(args) -> int:
    ast = parse(args.text)
    project = _load_project(args)
    result = execute(ast, project, project.config)
    print(summarize(result))
    payload = result.to_json()
    digest = hashlib.sha256(
        json.dumps({"query": result.query, "bandwidth": result.bandwidth,
                    "delta": result.delta, "alpha": result.alpha}, sort_keys=True).encode()
    ).hexdigest()[:12]
    path = project.write_result(f"query_{digest}.json", payload)
    if path:
        print(f"\nresult -> {path}")
    return 0


def cmd_baseline(args) -> int:
    tables = {}
    for root in args.train + args.test:
        if root in tables:
            continue
        project = Project.load(root)
        stride = args.stride or max(int(round(project.manifest.fps)), 1)
        tables[root] = build_feature_table(
            project.sequence, project.pred_log, project.gt_log, stride, scene_id=Path(root).name
        )
    report = evaluate_split(tables, args.train, args.test, max_depth=args.depth, seed=args.seed)
    print(json.dumps(report.to_json(), indent=2))
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    return 0


def cmd_synth(args) -> int:
    spec = ScenarioSpec.from_json(json.loads(Path(args.spec).read_text()))
    root, truth = generate_scenario(spec, args.out)
    print(f"project -> {root}")
    print(f"planted: {json.dumps(truth.to_json())}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(
        args.project,
        serve_frames=not args.no_frames,
        config_path=args.config,
        ui_dir=args.ui,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vizex",
        description="Explain video-analytics model errors by associating KPI and "
        "metric discontinuities, queried with SELECT ... BECAUSE.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a project directory")
    p.add_argument("--project", required=True)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("kpi", help="compute KPI series and export CSVs")
    p.add_argument("--project", required=True)
    p.add_argument("--config", help="kpis.json with definitions")
    p.add_argument("names", nargs="*", help="KPI names (default: all registered)")
    p.set_defaults(fn=cmd_kpi)

    p = sub.add_parser("eval", help="error series and heatmaps")
    p.add_argument("--project", required=True)
    p.add_argument("--grid", type=int, default=4)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("scan", help="scan a series for discontinuities")
    p.add_argument("--project", required=True)
    p.add_argument("--series", required=True)
    p.add_argument("--bandwidth", type=int, help="single bandwidth (default: configured ladder)")
    p.add_argument("--threshold", type=float, help="|t| threshold (default: calibrated)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--config")
    p.set_defaults(fn=cmd_scan)

    p = sub.add_parser("query", help="run a BECAUSE query")
    p.add_argument("text", help="query text")
    p.add_argument("--project", required=True)
    p.add_argument("--config")
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("baseline", help="decision-tree surrogate experiment")
    p.add_argument("--train", nargs="+", required=True, help="training scene directories")
    p.add_argument("--test", nargs="+", required=True, help="testing scene directories")
    p.add_argument("--stride", type=int, help="sampling stride (default: round(fps))")
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report JSON here")
    p.set_defaults(fn=cmd_baseline)

    p = sub.add_parser("synth", help="generate a synthetic scenario project")
    p.add_argument("--spec", required=True, help="ScenarioSpec JSON")
    p.add_argument("--out", required=True, help="output project directory")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("serve", help="HTTP API over one or more projects")
    p.add_argument("--project", action="append", required=True)
    p.add_argument("--port", type=int, default=8650)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--no-frames", action="store_true", help="disable frame serving (privacy)")
    p.add_argument("--config")
    p.add_argument("--ui", help="directory with the built explorer UI to mount at /ui")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except QuerySyntaxError as exc:
        print(f"syntax error at line {exc.line}, col {exc.col}: "
              f"expected {' or '.join(exc.expected)}, found {exc.found}", file=sys.stderr)
        return 2
    except VizexError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""HTTP API over loaded projects, consumed by the explorer UI and scripts.

All endpoints live under /api and return JSON except the frame route, which
passes PPM bytes through. Every engine error maps to exactly one machine code
in the error body: {"code", "message", "position"?}.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .errors import (
    QuerySyntaxError,
    SeriesTooShort,
    UnknownKpi,
    UnknownMetric,
    VizexError,
)
from .ingest import encode_ppm
from .kpi import KpiDefinition
from .metrics import error_heatmap, heatmap_to_json
from .project import EngineConfig, Project
from .query import QueryOptions, execute, parse
from .query import _sanitize as sanitize_json


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, position=None):
        self.status = status
        self.code = code
        self.message = message
        self.position = position
        super().__init__(message)

    def body(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.position is not None:
            out["position"] = self.position
        return out


def _project_id(root: Path) -> str:
    return hashlib.sha1(str(root.resolve()).encode()).hexdigest()[:8]


def _engine_to_api(exc: VizexError) -> ApiError:
    if isinstance(exc, QuerySyntaxError):
        return ApiError(422, "SYNTAX_ERROR", str(exc), position={"line": exc.line, "col": exc.col})
    if isinstance(exc, UnknownKpi):
        return ApiError(422, "UNKNOWN_KPI", str(exc))
    if isinstance(exc, UnknownMetric):
        return ApiError(422, "UNKNOWN_METRIC", str(exc))
    if isinstance(exc, SeriesTooShort):
        return ApiError(422, "SERIES_TOO_SHORT", str(exc))
    return ApiError(422, exc.code, str(exc))


def create_app(
    project_roots: list[str],
    serve_frames: bool = True,
    config_path: str | None = None,
    test_mode: bool = False,
    ui_dir: str | None = None,
) -> FastAPI:
    config = EngineConfig()
    kpi_defs = None
    if config_path:
        raw = json.loads(Path(config_path).read_text())
        kpi_defs = [KpiDefinition.from_json(d) for d in raw.get("kpis", raw)]
        from .kpi import default_definitions

        names = {d.name for d in kpi_defs}
        kpi_defs += [d for d in default_definitions() if d.name not in names]

    projects: dict[str, Project] = {}
    for root in project_roots:
        project = Project.load(root, config=config, kpi_definitions=kpi_defs)
        projects[_project_id(Path(root))] = project

    app = FastAPI(title="vizex", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.projects = projects
    app.state.serve_frames = serve_frames
    app.state.test_mode = test_mode

    @app.exception_handler(ApiError)
    async def api_error_handler(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body())

    @app.exception_handler(VizexError)
    async def engine_error_handler(_req: Request, exc: VizexError):
        api = _engine_to_api(exc)
        return JSONResponse(status_code=api.status, content=api.body())

    def get_project(pid: str) -> Project:
        if pid not in projects:
            raise ApiError(404, "UNKNOWN_PROJECT", f"no project {pid!r}")
        return projects[pid]

    def project_info(pid: str, project: Project) -> dict:
        return {
            "id": pid,
            "name": project.name,
            "root": str(project.root) if project.root else None,
            "width": project.manifest.width,
            "height": project.manifest.height,
            "frame_count": project.manifest.frame_count,
            "fps": project.manifest.fps,
            "label_of_interest": project.manifest.label_of_interest,
            "kpis": project.kpi_names(),
            "metrics": project.metric_names(),
            "frames_enabled": serve_frames,
        }

    @app.get("/api/projects")
    def list_projects():
        return [project_info(pid, p) for pid, p in sorted(projects.items())]

    @app.get("/api/projects/{pid}")
    def one_project(pid: str):
        return project_info(pid, get_project(pid))

    def slice_series(series, from_=None, to=None) -> dict:
        frames = series.frames()
        values = series.values()
        if from_ is not None:
            keep = frames >= from_
            frames, values = frames[keep], values[keep]
        if to is not None:
            keep = frames <= to
            frames, values = frames[keep], values[keep]
        return sanitize_json({"frames": frames.tolist(), "values": values.tolist()})

    @app.get("/api/projects/{pid}/series")
    def list_series(pid: str):
        project = get_project(pid)
        return {
            "kpis": [
                project.kpi_definitions[n].to_json()
                if n in project.kpi_definitions
                else {"name": n, "lambda": "external", "source": n}
                for n in project.kpi_names()
            ],
            "metrics": project.metric_names(),
        }

    @app.get("/api/projects/{pid}/series/{name}")
    def kpi_series(pid: str, name: str, from_: int | None = None, to: int | None = None):
        project = get_project(pid)
        if not project.has_kpi(name):
            raise ApiError(404, "UNKNOWN_SERIES", f"no KPI series {name!r}")
        series = project.kpi_series(name)
        if app.state.test_mode:
            fresh = Project(
                sequence=project.sequence, pred_log=project.pred_log, gt_log=project.gt_log,
                externals=project.externals,
                kpi_definitions=list(project.kpi_definitions.values()),
            ).kpi_series(name)
            assert fresh.points == series.points, "cache diverged from recomputation"
        return slice_series(series, from_, to)

    @app.get("/api/projects/{pid}/metrics/{name}")
    def metric_series(pid: str, name: str, from_: int | None = None, to: int | None = None):
        project = get_project(pid)
        if not project.has_metric(name):
            raise ApiError(404, "UNKNOWN_SERIES", f"no metric series {name!r}")
        return slice_series(project.metric_series(name), from_, to)

    @app.get("/api/projects/{pid}/heatmap")
    def heatmap(pid: str, kind: str = "undercount", grid: int = 4):
        project = get_project(pid)
        if kind not in ("overcount", "undercount"):
            raise ApiError(422, "BAD_PARAMETER", f"kind must be overcount|undercount, got {kind!r}")
        if not (1 <= grid <= 32):
            raise ApiError(422, "BAD_PARAMETER", f"grid must be 1..32, got {grid}")
        if project.pred_log is None or project.gt_log is None:
            raise ApiError(422, "MISSING_LOGS", "heatmaps need prediction and ground-truth logs")
        over, under = error_heatmap(
            project.pred_log, project.gt_log, project.manifest.label_of_interest,
            project.manifest.width, project.manifest.height, grid, grid,
        )
        return heatmap_to_json(over if kind == "overcount" else under)

    @app.get("/api/projects/{pid}/frames/{n}")
    def frame(pid: str, n: int):
        project = get_project(pid)
        if not app.state.serve_frames:
            raise ApiError(403, "FRAMES_DISABLED", "frame serving is disabled on this server")
        if not (0 <= n < project.manifest.frame_count):
            raise ApiError(404, "FRAME_OUT_OF_RANGE", f"frame {n} outside range")
        data = encode_ppm(project.sequence.frames[n].pixels)
        return Response(content=data, media_type="image/x-portable-pixmap")

    @app.post("/api/projects/{pid}/query")
    async def run_query(pid: str, request: Request):
        project = get_project(pid)
        try:
            body = await request.json()
        except Exception:
            raise ApiError(422, "BAD_REQUEST", "body must be JSON: {text, options?}")
        text = body.get("text")
        if not isinstance(text, str):
            raise ApiError(422, "BAD_REQUEST", "missing query text")
        ast = parse(text)
        opts = body.get("options") or {}
        if opts:
            ast = type(ast)(
                select=ast.select, source=ast.source, metric=ast.metric,
                comparator=ast.comparator, value=ast.value, disjuncts=ast.disjuncts,
                options=QueryOptions(
                    bandwidth=opts.get("bandwidth", ast.options.bandwidth),
                    delta=opts.get("delta", ast.options.delta),
                    alpha=opts.get("alpha", ast.options.alpha),
                ),
            )
        result = execute(ast, project, project.config)
        payload = result.to_json()
        digest = hashlib.sha256(
            json.dumps({"query": result.query, "bandwidth": result.bandwidth,
                        "delta": result.delta, "alpha": result.alpha}, sort_keys=True).encode()
        ).hexdigest()[:12]
        payload["result_id"] = f"query_{digest}"
        project.write_result(f"query_{digest}.json", payload)
        return payload

    @app.get("/api/projects/{pid}/results")
    def results_index(pid: str):
        project = get_project(pid)
        out = []
        results = project.results_dir()
        if results is not None:
            for path in sorted(results.glob("*.json")):
                out.append({"name": path.stem, "bytes": path.stat().st_size})
        return out

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app

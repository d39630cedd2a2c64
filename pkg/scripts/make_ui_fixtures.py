#!/usr/bin/env python3
"""Regenerate the explorer UI's test fixtures from a seeded scenario.

Writes real API response bodies (captured through the HTTP app itself) into
frontend/tests/fixtures/ so the UI tests exercise the exact wire format.

Usage: python scripts/make_ui_fixtures.py
"""

import json
import shutil
import tempfile
from dataclasses import replace
from pathlib import Path

from fastapi.testclient import TestClient

from vizex.server import create_app
from vizex.synth import StepEvent, generate_scenario, lighting_scenario

FIXTURES = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"
QUERY = "SELECT * FROM scene WHERE count_error = -1 BECAUSE luminosity"


def dump(name: str, payload) -> None:
    (FIXTURES / name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {name}")


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    workdir = Path(tempfile.mkdtemp(prefix="vizex_fixtures_"))
    try:
        spec = replace(
            lighting_scenario(21, frame_count=300),
            events=(StepEvent(frame=150, magnitude=-80.0),),
        )
        root = workdir / "scene"
        generate_scenario(spec, root)

        client = TestClient(create_app([str(root)], serve_frames=True))
        projects = client.get("/api/projects").json()
        pid = projects[0]["id"]
        dump("projects.json", projects)
        dump("project.json", client.get(f"/api/projects/{pid}").json())
        dump("series_index.json", client.get(f"/api/projects/{pid}/series").json())
        dump("series_luminosity.json", client.get(f"/api/projects/{pid}/series/luminosity").json())
        dump("metric_count_error.json", client.get(f"/api/projects/{pid}/metrics/count_error").json())
        for kind in ("overcount", "undercount"):
            dump(f"heatmap_{kind}.json", client.get(f"/api/projects/{pid}/heatmap?kind={kind}&grid=4").json())

        result = client.post(f"/api/projects/{pid}/query", json={"text": QUERY})
        assert result.status_code == 200, result.text
        dump("query_result.json", result.json())

        empty = client.post(
            f"/api/projects/{pid}/query",
            json={"text": "SELECT * FROM scene WHERE count_error = -1 BECAUSE edge_fraction"},
        )
        dump("query_result_empty.json", empty.json())

        bad = client.post(f"/api/projects/{pid}/query", json={"text": "SELECT * FROM WHERE"})
        assert bad.status_code == 422
        dump("error_syntax.json", bad.json())
        dump("error_unknown_kpi.json", client.post(
            f"/api/projects/{pid}/query",
            json={"text": "SELECT * FROM s WHERE count_error = -1 BECAUSE nope"},
        ).json())
        dump("error_frames_disabled.json", {"code": "FRAMES_DISABLED",
                                            "message": "frame serving is disabled on this server"})

        frame = client.get(f"/api/projects/{pid}/frames/150")
        (FIXTURES / "frame_150.ppm").write_bytes(frame.content)
        print("wrote frame_150.ppm")
    finally:
        shutil.rmtree(workdir, ignore_errors=True)


if __name__ == "__main__":
    main()

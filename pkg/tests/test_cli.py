import json
from dataclasses import replace
from pathlib import Path

import pytest

from vizex.cli import main
from vizex.synth import StepEvent, generate_scenario, lighting_scenario


@pytest.fixture(scope="module")
def project_dir(tmp_path_factory):
    spec = replace(
        lighting_scenario(0, frame_count=300),
        events=(StepEvent(frame=150, magnitude=-80.0),),
    )
    root = tmp_path_factory.mktemp("proj") / "scene"
    generate_scenario(spec, root)
    return root


class TestCliIngest:
    def test_valid_project(self, project_dir, capsys):
        assert main(["ingest", "--project", str(project_dir)]) == 0
        out = capsys.readouterr().out
        assert "300 frames" in out

    def test_invalid_project(self, tmp_path, capsys):
        (tmp_path / "manifest.json").write_text("{}")
        assert main(["ingest", "--project", str(tmp_path)]) == 1
        assert "error" in capsys.readouterr().err


class TestCliKpi:
    def test_export(self, project_dir, capsys):
        assert main(["kpi", "--project", str(project_dir), "luminosity"]) == 0
        csv = project_dir / "series" / "luminosity.csv"
        meta = project_dir / "series" / "luminosity.meta.json"
        assert csv.is_file() and meta.is_file()
        assert csv.read_text().startswith("frame,value\n")
        assert json.loads(meta.read_text())["definition"]["lambda"] == "luminosity"

    def test_custom_config(self, project_dir, tmp_path, capsys):
        cfg = tmp_path / "kpis.json"
        cfg.write_text(json.dumps({"kpis": [
            {"name": "cell_lum", "lambda": "luminosity",
             "region": {"kind": "grid_cell", "row": 1, "col": 1}, "w": 3}
        ]}))
        assert main(["kpi", "--project", str(project_dir), "--config", str(cfg), "cell_lum"]) == 0
        assert (project_dir / "series" / "cell_lum.csv").is_file()


class TestCliEval:
    def test_writes_heatmaps(self, project_dir, capsys):
        assert main(["eval", "--project", str(project_dir)]) == 0
        for kind in ("overcount", "undercount"):
            raw = json.loads((project_dir / "results" / f"heatmap_{kind}.json").read_text())
            assert raw["kind"] == kind
            assert len(raw["cells"]) == 4

    def test_exports_metric_series_csv(self, project_dir, capsys):
        assert main(["eval", "--project", str(project_dir)]) == 0
        for name in ("count_error", "correct_rate"):
            text = (project_dir / "series" / f"{name}.csv").read_text()
            assert text.startswith("frame,value\n")


class TestCliScan:
    def test_scan_series(self, project_dir, capsys):
        assert main([
            "scan", "--project", str(project_dir),
            "--series", "luminosity", "--bandwidth", "20",
        ]) == 0
        raw = json.loads((project_dir / "results" / "rdd_luminosity.json").read_text())
        assert isinstance(raw, list) and raw
        assert {"cutpoint", "tau", "se_tau", "t_stat", "bandwidth"} <= set(raw[0])
        assert abs(raw[0]["cutpoint"] - 150) <= 2

    def test_scan_constant_series_empty(self, project_dir, capsys):
        assert main([
            "scan", "--project", str(project_dir),
            "--series", "edge_fraction", "--bandwidth", "20",
        ]) == 0
        raw = json.loads((project_dir / "results" / "rdd_edge_fraction.json").read_text())
        assert raw == []


class TestCliQuery:
    def test_reference_query(self, project_dir, capsys):
        code = main([
            "query", "SELECT * FROM scene WHERE count_error = -1 BECAUSE luminosity",
            "--project", str(project_dir),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "evidence window" in out
        results = list((project_dir / "results").glob("query_*.json"))
        assert results

    def test_syntax_error_exit_2(self, project_dir, capsys):
        assert main(["query", "SELECT", "--project", str(project_dir)]) == 2
        err = capsys.readouterr().err
        assert "line 1" in err and "col" in err

    def test_unknown_kpi_exit_1(self, project_dir, capsys):
        code = main([
            "query", "SELECT * FROM s WHERE count_error = -1 BECAUSE nope",
            "--project", str(project_dir),
        ])
        assert code == 1
        assert "UNKNOWN_KPI" in capsys.readouterr().err

    def test_usage_error_exit_2(self, capsys):
        assert main(["query"]) == 2


class TestCliSynth:
    def test_generate_from_spec_json(self, tmp_path, capsys):
        spec = replace(
            lighting_scenario(1, frame_count=150),
            events=(StepEvent(frame=75, magnitude=-80.0),),
        )
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec.to_json()))
        out_dir = tmp_path / "generated"
        assert main(["synth", "--spec", str(spec_path), "--out", str(out_dir)]) == 0
        assert (out_dir / "manifest.json").is_file()
        assert (out_dir / "planted_truth.json").is_file()
        assert main(["ingest", "--project", str(out_dir)]) == 0


class TestCliBaseline:
    def test_report(self, tmp_path, capsys):
        from vizex.synth import zone_scenario

        roots = []
        for i, cell in enumerate([(0, 0), (3, 3)]):
            root = tmp_path / f"scene{i}"
            generate_scenario(zone_scenario(seed=i, zone_cell=cell, frame_count=120), root)
            roots.append(str(root))
        code = main([
            "baseline", "--train", roots[0], "--test", roots[1],
            "--stride", "2", "--out", str(tmp_path / "report.json"),
        ])
        assert code == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert 0.0 <= report["balanced_testing_accuracy"] <= 1.0
        assert report["max_depth"] == 10

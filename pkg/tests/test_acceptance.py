"""Acceptance suite: one test per release criterion, each printing a PASS line
with the measured numbers. Run with `pytest tests/test_acceptance.py -v -s`.

Monte-Carlo criteria use counter-based seed streams, so every number here is
reproducible bit for bit; a criterion that passes once passes always.
"""

import json
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from oracles import canny_mask_loop, mean_color_loop, mean_luma_loop, ols_normal_equations
from vizex.errors import QuerySyntaxError
from vizex.ingest import Box, PredictionLog
from vizex.kpi import Region, average_color, canny_mask, edge_fraction, luminosity, rec601_luma
from vizex.metrics import error_heatmap, match_boxes
from vizex.query import parse, pretty_print
from vizex.rdd import discontinuity_at, local_linear_fit, null_threshold, scan_statistics
from vizex.surrogate import build_feature_table, evaluate_split
from vizex.synth import (
    build_scenario,
    generate_scenario,
    lighting_scenario,
    run_query_battery,
    zone_scenario,
)

REFERENCE_QUERY = "SELECT * FROM scene WHERE count_error = -1 BECAUSE luminosity"
CONFOUND_QUERY = "SELECT * FROM scene WHERE count_error = -1 BECAUSE edge_fraction"


def report(name: str, detail: str):
    print(f"\nPASS {name}: {detail}")


class TestAcceptance:
    def test_01_planted_cause_recovery(self):
        # lighting scenario (2000 frames, 64x64, 140->60 at frame 1000,
        # detector 0.95/0.45, knee 90), alpha=0.05, bandwidth 20: over 100
        # seeds the top window must contain frame 1000 +/-20 in >=95 runs,
        # inside a 60 s budget
        battery = run_query_battery(
            lighting_scenario, REFERENCE_QUERY, n_seeds=100, tolerance_frames=20
        )
        assert battery.top_hits >= 95, battery.to_json()
        assert battery.elapsed_seconds < 60.0, battery.to_json()
        report(
            "planted-cause recovery",
            f"top window hit in {battery.top_hits}/100 seeds, "
            f"battery ran {battery.elapsed_seconds:.1f}s (< 60s)",
        )

    def test_02_confound_rejection(self):
        # the same scenes queried BECAUSE edge_fraction (no planted step)
        # may return windows in at most 9 of 100 runs
        battery = run_query_battery(
            lighting_scenario, CONFOUND_QUERY, n_seeds=100, tolerance_frames=20
        )
        assert battery.seeds_with_windows <= 9, battery.to_json()
        report(
            "confound rejection",
            f"windows returned in {battery.seeds_with_windows}/100 runs (<= 9)",
        )

    def test_03_rdd_estimator_exactness(self):
        # noiseless step: tau equals the step to 1e-9
        y = np.concatenate([np.full(60, 3.0), np.full(60, 17.5)])
        d = discontinuity_at(list(enumerate(y)), 60, 20)
        assert abs(d.tau - 14.5) <= 1e-9

        # exactly linear series: tau = 0 to 1e-9 at every admissible cut
        t = np.arange(120)
        linear = list(zip(t, 0.7 * t - 3.0))
        worst_linear = max(
            abs(discontinuity_at(linear, c, 20).tau) for c in range(20, 101)
        )
        assert worst_linear <= 1e-9

        # 1000 random fits match the normal-equations oracle to 1e-9
        rng = np.random.default_rng(20240101)
        worst = 0.0
        for _ in range(1000):
            n = int(rng.integers(5, 60))
            cut = int(rng.integers(-30, 30))
            ts = np.arange(cut, cut + n)
            ys = rng.standard_normal(n) * rng.uniform(0.1, 8.0) + rng.uniform(-5, 5)
            fit = local_linear_fit(list(zip(ts, ys)), cut, "right", n)
            oi, osl, os2, ose = ols_normal_equations(ts, ys, cut)
            worst = max(
                worst,
                abs(fit.intercept_at_cut - oi),
                abs(fit.slope - osl),
                abs(fit.residual_variance - os2),
                abs(fit.se_intercept - ose),
            )
        assert worst <= 1e-9
        report(
            "rdd estimator exactness",
            f"step tau exact, linear tau <= {worst_linear:.2e}, "
            f"1000 oracle fits max dev {worst:.2e}",
        )

    def test_04_rdd_calibration(self):
        # threshold from 500 simulations at alpha=0.05; family-wise false-alarm
        # rate over 1000 fresh null series must lie in [0.02, 0.09]
        thr = null_threshold(500, 20, alpha=0.05, n_sims=500, seed=7)
        alarms = 0
        for i in range(1000):
            rng = np.random.Generator(
                np.random.Philox(np.random.SeedSequence(entropy=91, spawn_key=(i,)))
            )
            _, _, t = scan_statistics(rng.standard_normal(500), 20)
            if np.max(np.abs(t)) >= thr:
                alarms += 1
        rate = alarms / 1000
        assert 0.02 <= rate <= 0.09, f"false-alarm rate {rate}"
        report("rdd calibration", f"threshold {thr:.3f}, false-alarm rate {rate:.3f} in [0.02, 0.09]")

    def test_05_equivariance_suite(self):
        # location / scale / time-reversal invariants to 1e-9 on 200 random series
        worst = 0.0
        for i in range(200):
            rng = np.random.Generator(
                np.random.Philox(np.random.SeedSequence(entropy=77, spawn_key=(i,)))
            )
            n = int(rng.integers(60, 200))
            w = int(rng.integers(5, 25))
            y = rng.standard_normal(n) * rng.uniform(0.5, 5.0)
            cut = int(rng.integers(w, n - w + 1))
            base = discontinuity_at(list(enumerate(y)), cut, w)

            shift = discontinuity_at(list(enumerate(y + 37.5)), cut, w)
            worst = max(worst, abs(shift.tau - base.tau), abs(shift.t_stat - base.t_stat))

            scale = discontinuity_at(list(enumerate(y * 2.5)), cut, w)
            worst = max(worst, abs(scale.tau - 2.5 * base.tau), abs(scale.t_stat - base.t_stat))

            rev = discontinuity_at(list(enumerate(y[::-1])), n - cut, w)
            worst = max(worst, abs(rev.tau + base.tau), abs(abs(rev.t_stat) - abs(base.t_stat)))
        assert worst <= 1e-9
        report("equivariance suite", f"200 series, max deviation {worst:.2e} (<= 1e-9)")

    def test_06_feature_oracle_equivalence(self):
        # 100 random 64x64 frames: means to 1e-9, edge masks bit-identical
        worst_mean = 0.0
        for i in range(100):
            rng = np.random.Generator(
                np.random.Philox(np.random.SeedSequence(entropy=55, spawn_key=(i,)))
            )
            px = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
            whole = Region.whole(64, 64)
            worst_mean = max(
                worst_mean, abs(luminosity(px, whole) - mean_luma_loop(px.tolist()))
            )
            got_rgb = average_color(px, whole)
            want_rgb = mean_color_loop(px.tolist())
            worst_mean = max(worst_mean, max(abs(g - w) for g, w in zip(got_rgb, want_rgb)))
            gray = rec601_luma(px)
            assert np.array_equal(canny_mask(gray), canny_mask_loop(gray)), f"mask differs at {i}"
        assert worst_mean <= 1e-9
        report(
            "feature oracle equivalence",
            f"100 frames: mean deviation <= {worst_mean:.2e}, all edge masks bit-identical",
        )

    def test_07_surrogate_generalization_gap(self):
        # cross-scene protocol: depth-10 tree, train on two zone scenes, test
        # on a third with a different zone; train >= 0.55 and test <= 0.40 for
        # each of 20 seeds. (The reference protocol's absolute numbers, e.g.
        # 80.74%/34.05%, need the original dataset; the gap property is the
        # desk-scale substitute.)
        scene_defs = [((0, 0), 120.0), ((3, 3), 140.0), ((3, 0), 160.0)]
        trains, tests = [], []
        for seed in range(20):
            tables = {}
            for i, (cell, bg) in enumerate(scene_defs):
                sc = build_scenario(
                    zone_scenario(seed=seed * 3 + i, zone_cell=cell,
                                  frame_count=400, background_level=bg)
                )
                tables[f"s{i}"] = build_feature_table(
                    sc.sequence, sc.pred_log, sc.gt_log, 2, scene_id=f"s{i}"
                )
            r = evaluate_split(tables, ["s0", "s1"], ["s2"], max_depth=10, seed=0)
            trains.append(r.balanced_training_accuracy)
            tests.append(r.balanced_testing_accuracy)
        assert min(trains) >= 0.55, trains
        assert max(tests) <= 0.40, tests
        report(
            "surrogate generalization gap",
            f"20 seeds: train in [{min(trains):.3f}, {max(trains):.3f}] (>= 0.55), "
            f"test in [{min(tests):.3f}, {max(tests):.3f}] (<= 0.40)",
        )

    def test_08_heatmap_identity(self):
        # pre-normalization mass equals unmatched counts exactly on 50 random logs
        for i in range(50):
            rng = np.random.Generator(
                np.random.Philox(np.random.SeedSequence(entropy=31, spawn_key=(i,)))
            )
            frames = int(rng.integers(3, 12))

            def rand_log(provenance):
                per = []
                for _ in range(frames):
                    boxes = tuple(
                        Box(int(rng.integers(0, 15)), int(rng.integers(0, 15)),
                            int(rng.integers(1, 6)), int(rng.integers(1, 6)), "person")
                        for _ in range(int(rng.integers(0, 5)))
                    )
                    per.append(boxes)
                return PredictionLog(frame_count=frames, boxes=tuple(per), provenance=provenance)

            pred, gt = rand_log("prediction"), rand_log("ground_truth")
            over, under = error_heatmap(pred, gt, "person", 20, 20)
            want_over = want_under = 0
            for t in range(frames):
                m = match_boxes(gt.boxes_at(t), pred.boxes_at(t))
                want_over += len(m.unmatched_det)
                want_under += len(m.unmatched_gt)
            assert sum(map(sum, over.counts)) == want_over
            assert sum(map(sum, under.counts)) == want_under

        # planted-zone scenario: the hottest undercount cell is the zone
        sc = build_scenario(zone_scenario(seed=5, zone_cell=(2, 1), frame_count=400))
        _, under = error_heatmap(sc.pred_log, sc.gt_log, "person", 64, 64)
        cells = np.array(under.cells)
        hottest = np.unravel_index(np.argmax(cells), cells.shape)
        assert hottest == (2, 1), f"hottest cell {hottest}"
        report(
            "heatmap identity",
            "mass identity exact on 50 random logs; hottest undercount cell is the planted zone",
        )

    def test_09_parser_suite(self):
        from test_query import MALFORMED, random_ast  # reuse the corpora
        import random as _random

        ast = parse("SELECT * FROM Video WHERE metrics = 0 BECAUSE kpi_1 OR kpi_2")
        assert ast.select is None and ast.source == "Video"
        assert ast.metric == "metrics" and ast.comparator == "=" and ast.value == 0.0
        assert [[a.name for a in conj] for conj in ast.disjuncts] == [["kpi_1"], ["kpi_2"]]

        rng = _random.Random(20240202)
        for _ in range(1000):
            a = random_ast(rng)
            assert parse(pretty_print(a)) == a

        assert len(MALFORMED) == 50
        for text in MALFORMED:
            with pytest.raises(QuerySyntaxError) as exc:
                parse(text)
            assert exc.value.line >= 1 and exc.value.col >= 1
        report(
            "parser suite",
            "reference query AST verified; 1000 generated ASTs round-trip; "
            "50 malformed queries all carry positions",
        )

    def test_10_end_to_end_determinism(self, tmp_path):
        # `vizex query` twice on the same project yields byte-identical JSON
        spec = replace(
            lighting_scenario(11, frame_count=300),
            events=(replace(lighting_scenario(11).events[0], frame=150),),
        )
        root = tmp_path / "scene"
        generate_scenario(spec, root)

        def run_once(tag: str) -> bytes:
            out = subprocess.run(
                [sys.executable, "-m", "vizex.cli", "query", REFERENCE_QUERY,
                 "--project", str(root)],
                capture_output=True, text=True, timeout=300,
            )
            assert out.returncode == 0, out.stderr
            results = sorted((root / "results").glob("query_*.json"))
            assert results, "no query result written"
            data = results[-1].read_bytes()
            (root / "results" / f"copy_{tag}.bin").write_bytes(data)
            return data

        first = run_once("a")
        for f in (root / "results").glob("query_*.json"):
            f.unlink()
        second = run_once("b")
        assert first == second
        report("end-to-end determinism", f"two CLI runs produced identical {len(first)}-byte results")

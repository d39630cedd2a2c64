import math

import numpy as np
import pytest

from oracles import ols_normal_equations
from vizex.errors import DegenerateDesign, InsufficientData, SeriesTooShort
from vizex.rdd import (
    associate,
    discontinuity_at,
    local_linear_fit,
    null_threshold,
    scan_discontinuities,
    scan_statistics,
)


def series_of(values, start=0):
    return [(start + i, float(v)) for i, v in enumerate(values)]


def step_series(n, cut, low, high, noise=0.0, rng=None):
    y = np.full(n, float(low))
    y[cut:] = high
    if noise and rng is not None:
        y = y + rng.standard_normal(n) * noise
    return series_of(y)


class TestLocalLinearFit:
    def test_exact_line(self):
        pts = [(t, 2.0 * t + 3.0) for t in range(100)]
        for cut, side in [(50, "left"), (50, "right"), (20, "right")]:
            fit = local_linear_fit(pts, cut, side, 10)
            assert fit.slope == pytest.approx(2.0, abs=1e-9)
            assert fit.intercept_at_cut == pytest.approx(2.0 * cut + 3.0, abs=1e-9)
            assert fit.residual_variance == pytest.approx(0.0, abs=1e-9)

    def test_constant(self):
        pts = [(t, 7.0) for t in range(40)]
        fit = local_linear_fit(pts, 20, "left", 10)
        assert fit.slope == 0.0
        assert fit.intercept_at_cut == 7.0
        assert fit.se_intercept == 0.0

    def test_window_selection(self):
        pts = [(t, float(t)) for t in range(30)]
        left = local_linear_fit(pts, 10, "left", 5)
        right = local_linear_fit(pts, 10, "right", 5)
        assert left.n == 5 and right.n == 5
        # left covers 5..9, right covers 10..14
        assert left.x_bar == -3.0
        assert right.x_bar == 2.0

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            local_linear_fit([(5, 1.0)], 10, "left", 10)

    def test_degenerate_design(self):
        with pytest.raises(DegenerateDesign):
            local_linear_fit([(4, 1.0), (4, 2.0)], 5, "left", 3)

    def test_against_normal_equations_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            n = int(rng.integers(5, 50))
            cut = int(rng.integers(-20, 20))
            ts = np.arange(cut, cut + n)
            ys = rng.standard_normal(n) * rng.uniform(0.1, 10) + rng.uniform(-5, 5)
            fit = local_linear_fit(list(zip(ts, ys)), cut, "right", n)
            want_int, want_slope, want_s2, want_se = ols_normal_equations(ts, ys, cut)
            assert fit.intercept_at_cut == pytest.approx(want_int, abs=1e-9)
            assert fit.slope == pytest.approx(want_slope, abs=1e-9)
            assert fit.residual_variance == pytest.approx(want_s2, abs=1e-9)
            assert fit.se_intercept == pytest.approx(want_se, abs=1e-9)


class TestDiscontinuityAt:
    def test_noiseless_step(self):
        s = step_series(100, 50, 10.0, 20.0)
        d = discontinuity_at(s, 50, 10)
        assert d.tau == pytest.approx(10.0, abs=1e-12)
        assert d.se_tau == 0.0
        assert d.t_stat == math.inf

    def test_constant(self):
        s = series_of([4.0] * 60)
        d = discontinuity_at(s, 30, 10)
        assert d.tau == 0.0
        assert d.t_stat == 0.0

    def test_linear_ramp_absorbed(self):
        s = [(t, float(t)) for t in range(100)]
        for cut in (20, 50, 80):
            d = discontinuity_at(s, cut, 10)
            assert d.tau == pytest.approx(0.0, abs=1e-9)

    def test_location_equivariance(self):
        rng = np.random.default_rng(1)
        y = rng.standard_normal(80)
        base = discontinuity_at(series_of(y), 40, 15)
        shifted = discontinuity_at(series_of(y + 100.0), 40, 15)
        assert shifted.tau == pytest.approx(base.tau, abs=1e-9)
        assert shifted.t_stat == pytest.approx(base.t_stat, abs=1e-9)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(2)
        y = rng.standard_normal(80)
        base = discontinuity_at(series_of(y), 40, 15)
        scaled = discontinuity_at(series_of(y * 3.5), 40, 15)
        assert scaled.tau == pytest.approx(3.5 * base.tau, abs=1e-9)
        assert scaled.t_stat == pytest.approx(base.t_stat, abs=1e-9)

    def test_time_reversal(self):
        rng = np.random.default_rng(3)
        n = 90
        y = rng.standard_normal(n)
        for cut in (20, 45, 70):
            fwd = discontinuity_at(series_of(y), cut, 12)
            rev = discontinuity_at(series_of(y[::-1]), n - cut, 12)
            assert rev.tau == pytest.approx(-fwd.tau, abs=1e-9)
            assert abs(rev.t_stat) == pytest.approx(abs(fwd.t_stat), abs=1e-9)


class TestScan:
    def test_constant_series_empty(self):
        assert scan_discontinuities(series_of([5.0] * 100), 10, 3.0) == []

    def test_too_short(self):
        with pytest.raises(SeriesTooShort):
            scan_discontinuities(series_of([1.0] * 30), 20, 3.0)

    def test_matches_pointwise_estimates(self):
        rng = np.random.default_rng(5)
        y = rng.standard_normal(120)
        s = series_of(y)
        tau, se_tau, t = scan_statistics(np.array([v for _, v in s]), 15)
        cuts = list(range(15, 120 - 15 + 1))
        for idx, cut in enumerate(cuts):
            d = discontinuity_at(s, cut, 15)
            assert tau[idx] == pytest.approx(d.tau, abs=1e-9)
            assert se_tau[idx] == pytest.approx(d.se_tau, abs=1e-9)
            assert t[idx] == pytest.approx(d.t_stat, abs=1e-9)

    def test_planted_step_battery(self):
        # 10-sigma step at t=100, unit noise, length 200, w=20, threshold 4:
        # exactly one detection with cut within +/-2 of 100, >=95 of 100 seeds
        hits = 0
        for seed in range(100):
            rng = np.random.Generator(
                np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
            )
            s = step_series(200, 100, 0.0, 10.0, noise=1.0, rng=rng)
            found = scan_discontinuities(s, 20, 4.0, min_separation=20)
            if len(found) == 1 and abs(found[0].cutpoint - 100) <= 2:
                hits += 1
        assert hits >= 95

    def test_two_steps(self):
        rng = np.random.default_rng(11)
        y = np.zeros(260)
        y[90:] += 8.0
        y[170:] += 8.0
        y += rng.standard_normal(260) * 0.5
        found = scan_discontinuities(series_of(y), 20, 4.0, min_separation=20)
        assert len(found) == 2
        cuts = sorted(d.cutpoint for d in found)
        assert abs(cuts[0] - 90) <= 2 and abs(cuts[1] - 170) <= 2

    def test_sorted_by_strength(self):
        rng = np.random.default_rng(13)
        y = np.zeros(300)
        y[100:] += 4.0
        y[200:] += 20.0
        y += rng.standard_normal(300) * 0.5
        found = scan_discontinuities(series_of(y), 20, 4.0, min_separation=20)
        assert len(found) == 2
        assert abs(found[0].cutpoint - 200) <= 2  # stronger first
        assert abs(found[0].t_stat) >= abs(found[1].t_stat)

    def test_suppression_radius(self):
        # neighbors of a strong cut are above threshold but suppressed
        rng = np.random.default_rng(17)
        s = step_series(200, 100, 0.0, 10.0, noise=0.5, rng=rng)
        found = scan_discontinuities(s, 20, 3.0, min_separation=20)
        cuts = [d.cutpoint for d in found]
        for a in cuts:
            for b in cuts:
                assert a == b or abs(a - b) >= 20


class TestAssociate:
    def disc(self, cut, t_stat, name="s"):
        from vizex.rdd import DiscontinuityEstimate

        return DiscontinuityEstimate(
            series_name=name, cutpoint=cut, tau=1.0, se_tau=0.1, t_stat=t_stat, bandwidth=20
        )

    def test_empty_metric_list(self):
        assert associate([self.disc(100, 5.0)], [], 5) == []

    def test_pair_within_tolerance(self):
        ev = associate([self.disc(100, 5.0, "kpi")], [self.disc(103, 4.0, "m")], 5)
        assert len(ev) == 1
        assert ev[0].lag == -3
        assert ev[0].score == 4.0

    def test_pair_outside_tolerance(self):
        assert associate([self.disc(100, 5.0)], [self.disc(120, 4.0)], 5) == []

    def test_sorted_by_score(self):
        kpis = [self.disc(100, 3.0, "a"), self.disc(200, 9.0, "b")]
        metrics = [self.disc(101, 8.0, "m"), self.disc(201, 10.0, "m")]
        ev = associate(kpis, metrics, 5)
        assert [e.score for e in ev] == [9.0, 3.0]


class TestNullThreshold:
    def test_alpha_one_gives_minimum(self):
        thr = null_threshold(80, 10, alpha=1.0, n_sims=100, seed=1)
        maxima = []
        for i in range(100):
            from vizex.rdd import _null_rng

            y = _null_rng(1, i).standard_normal(80)
            _, _, t = scan_statistics(y, 10)
            maxima.append(np.max(np.abs(t)))
        assert thr == pytest.approx(min(maxima))

    def test_deterministic(self):
        null_threshold.cache_clear()
        a = null_threshold(200, 20, alpha=0.05, n_sims=100, seed=9)
        null_threshold.cache_clear()
        b = null_threshold(200, 20, alpha=0.05, n_sims=100, seed=9)
        assert a == b

    def test_false_alarm_rate_calibrated(self):
        thr = null_threshold(500, 20, alpha=0.05, n_sims=500, seed=7)
        alarms = 0
        n_fresh = 400
        for i in range(n_fresh):
            rng = np.random.default_rng(10_000 + i)
            y = rng.standard_normal(500)
            _, _, t = scan_statistics(y, 20)
            if np.max(np.abs(t)) >= thr:
                alarms += 1
        rate = alarms / n_fresh
        assert 0.01 <= rate <= 0.10

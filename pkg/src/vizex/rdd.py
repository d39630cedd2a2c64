"""Discontinuity detection via local linear regression on each side of a cut,
plus association of coincident KPI/metric discontinuities.

Cut semantics: a cut c sits on the boundary between frames c-1 and c. The left
window covers frames [c-w, c-1], the right window [c, c+w-1] (uniform kernel,
sharp design). Each side is fit by ordinary least squares; the effect tau is
the difference of the two fitted lines evaluated at the boundary time c - 1/2.
Evaluating at the boundary (rather than at frame c) is what makes the
time-reversal invariant exact: reversing the series maps a cut at c to a cut
at N - c and negates tau while preserving |t|.

Significance is calibrated empirically: null_threshold simulates Gaussian
white-noise series and returns a quantile of the max-|t| statistic, so the
scan controls family-wise false alarms over the many cutpoints it evaluates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateDesign, InsufficientData, SeriesTooShort

LEFT = "left"
RIGHT = "right"


@dataclass(frozen=True)
class LinearFit:
    intercept_at_cut: float  # fitted value at t = c
    slope: float  # per frame
    residual_variance: float
    se_intercept: float
    n: int
    # window geometry, needed to evaluate the line and its SE at other times
    x_bar: float
    s_xx: float

    def value_at(self, x: float) -> float:
        """Fitted value at offset x from the cut (x = t - c)."""
        return self.intercept_at_cut + self.slope * x

    def se_at(self, x: float) -> float:
        """Standard error of the fitted value at offset x from the cut."""
        var = self.residual_variance * (1.0 / self.n + (x - self.x_bar) ** 2 / self.s_xx)
        return math.sqrt(max(var, 0.0))


@dataclass(frozen=True)
class DiscontinuityEstimate:
    series_name: str
    cutpoint: int  # boundary between frames cutpoint-1 and cutpoint
    tau: float  # right-limit minus left-limit at the boundary
    se_tau: float
    t_stat: float
    bandwidth: int

    def to_json(self) -> dict:
        return {
            "cutpoint": self.cutpoint,
            "tau": self.tau,
            "se_tau": self.se_tau,
            "t_stat": self.t_stat,
            "bandwidth": self.bandwidth,
        }


@dataclass(frozen=True)
class AssociationEvidence:
    kpi_disc: DiscontinuityEstimate
    metric_disc: DiscontinuityEstimate
    lag: int  # kpi cut minus metric cut
    score: float  # min(|t_kpi|, |t_metric|)

    def to_json(self) -> dict:
        return {
            "kpi_series": self.kpi_disc.series_name,
            "metric_series": self.metric_disc.series_name,
            "kpi": self.kpi_disc.to_json(),
            "metric": self.metric_disc.to_json(),
            "lag": self.lag,
            "score": self.score,
        }


def _as_arrays(series) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(series, "frames") and callable(series.frames):
        return series.frames(), series.values()
    pts = list(series)
    t = np.array([p[0] for p in pts], dtype=np.int64)
    y = np.array([p[1] for p in pts], dtype=np.float64)
    return t, y


def _t_statistic(tau: float, se_tau: float) -> float:
    if se_tau > 0.0:
        return tau / se_tau
    return math.inf if tau != 0.0 else 0.0


def local_linear_fit(points, cut: int, side: str, bandwidth: int) -> LinearFit:
    """OLS over one side's window, re-parameterized so the intercept is the
    fitted value at t = cut. Left side uses t in [cut-w, cut-1], right side
    t in [cut, cut+w-1]."""
    t, y = _as_arrays(points)
    if side == LEFT:
        sel = (t >= cut - bandwidth) & (t <= cut - 1)
    elif side == RIGHT:
        sel = (t >= cut) & (t <= cut + bandwidth - 1)
    else:
        raise ValueError(f"side must be left or right, got {side!r}")
    ts = t[sel].astype(np.float64)
    ys = y[sel]
    n = len(ts)
    if n < 2:
        raise InsufficientData(f"{side} window at cut {cut} has {n} points, need 2")
    if np.all(ts == ts[0]):
        raise DegenerateDesign(f"all {n} points share t = {ts[0]}")

    x = ts - cut
    x_bar = float(x.mean())
    y_bar = float(ys.mean())
    dx = x - x_bar
    s_xx = float(dx @ dx)
    s_xy = float(dx @ (ys - y_bar))
    slope = s_xy / s_xx
    intercept = y_bar - slope * x_bar  # fitted value at x = 0

    resid = ys - (y_bar + slope * dx)
    rss = float(resid @ resid)
    s2 = rss / (n - 2) if n > 2 else 0.0
    se = math.sqrt(max(s2 * (1.0 / n + x_bar**2 / s_xx), 0.0))
    return LinearFit(
        intercept_at_cut=intercept,
        slope=slope,
        residual_variance=s2,
        se_intercept=se,
        n=n,
        x_bar=x_bar,
        s_xx=s_xx,
    )


def discontinuity_at(series, cutpoint: int, bandwidth: int, name: str = "") -> DiscontinuityEstimate:
    """Estimate the jump across the boundary between frames cutpoint-1 and
    cutpoint: both local lines evaluated at the boundary time cutpoint - 1/2."""
    left = local_linear_fit(series, cutpoint, LEFT, bandwidth)
    right = local_linear_fit(series, cutpoint, RIGHT, bandwidth)
    tau = right.value_at(-0.5) - left.value_at(-0.5)
    se_tau = math.sqrt(left.se_at(-0.5) ** 2 + right.se_at(-0.5) ** 2)
    return DiscontinuityEstimate(
        series_name=name,
        cutpoint=cutpoint,
        tau=tau,
        se_tau=se_tau,
        t_stat=_t_statistic(tau, se_tau),
        bandwidth=bandwidth,
    )


def scan_statistics(values: np.ndarray, bandwidth: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(tau, se_tau, t) arrays over every admissible cut of a contiguous series.

    For n values there are n - 2w + 1 admissible cuts, at positions w..n-w.
    Vectorized equivalent of calling discontinuity_at per cut.
    """
    w = bandwidth
    n = len(values)
    if n < 2 * w:
        raise SeriesTooShort(n, 2 * w)
    y = np.asarray(values, dtype=np.float64)
    rows = sliding_window_view(y, w)  # rows[i] = y[i : i+w]
    left_rows = rows[0 : n - 2 * w + 1]
    right_rows = rows[w : n - w + 1]

    def side_stats(win: np.ndarray, x: np.ndarray):
        x_bar = float(x.mean())
        dx = x - x_bar
        s_xx = float(dx @ dx)
        y_bar = win.mean(axis=1)
        s_xy = win @ dx
        slope = s_xy / s_xx
        fitted = y_bar[:, None] + slope[:, None] * dx[None, :]
        resid = win - fitted
        rss = np.einsum("ij,ij->i", resid, resid)
        s2 = rss / (w - 2) if w > 2 else np.zeros_like(rss)
        # value and SE of the line at the boundary x0 = -0.5
        x0 = -0.5
        value = y_bar + slope * (x0 - x_bar)
        var = s2 * (1.0 / w + (x0 - x_bar) ** 2 / s_xx)
        return value, np.sqrt(np.maximum(var, 0.0))

    x_left = np.arange(-w, 0, dtype=np.float64)
    x_right = np.arange(0, w, dtype=np.float64)
    left_val, left_se = side_stats(left_rows, x_left)
    right_val, right_se = side_stats(right_rows, x_right)

    tau = right_val - left_val
    se_tau = np.sqrt(left_se**2 + right_se**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se_tau > 0.0, tau / se_tau, np.where(tau != 0.0, np.inf, 0.0))
    return tau, se_tau, t


def scan_discontinuities(
    series,
    bandwidth: int,
    t_threshold: float,
    min_separation: int = 1,
    name: str = "",
) -> list[DiscontinuityEstimate]:
    """Evaluate every admissible cut, keep |t| >= threshold, then greedily
    suppress candidates closer than min_separation to a stronger accepted one
    (ties go to the earlier cut). Sorted by descending |t|."""
    assert min_separation >= 1
    frames, values = _as_arrays(series)
    if len(frames) > 1:
        steps = np.diff(frames)
        assert np.all(steps == 1), "scan requires a contiguous series"
    w = bandwidth
    tau, se_tau, t = scan_statistics(values, w)
    cuts = frames[w : len(frames) - w + 1]

    order = sorted(range(len(cuts)), key=lambda i: (-abs(t[i]), cuts[i]))
    accepted: list[int] = []
    for i in order:
        if abs(t[i]) < t_threshold:
            break
        if any(abs(int(cuts[i]) - int(cuts[j])) < min_separation for j in accepted):
            continue
        accepted.append(i)
    return [
        DiscontinuityEstimate(
            series_name=name,
            cutpoint=int(cuts[i]),
            tau=float(tau[i]),
            se_tau=float(se_tau[i]),
            t_stat=float(t[i]),
            bandwidth=w,
        )
        for i in accepted
    ]


def associate(
    kpi_discs: list[DiscontinuityEstimate],
    metric_discs: list[DiscontinuityEstimate],
    tolerance_delta: int,
) -> list[AssociationEvidence]:
    """All (kpi, metric) pairs with |lag| <= delta, scored by the weaker leg's
    |t|, sorted by descending score. A metric discontinuity may appear in one
    pair per KPI discontinuity."""
    evidence = []
    for k in kpi_discs:
        for m in metric_discs:
            lag = k.cutpoint - m.cutpoint
            if abs(lag) <= tolerance_delta:
                evidence.append(
                    AssociationEvidence(
                        kpi_disc=k,
                        metric_disc=m,
                        lag=lag,
                        score=min(abs(k.t_stat), abs(m.t_stat)),
                    )
                )
    evidence.sort(key=lambda e: (-e.score, e.kpi_disc.cutpoint, e.metric_disc.cutpoint))
    return evidence


def _null_rng(seed: int, sim_index: int) -> np.random.Generator:
    # counter-based: each simulation's stream depends only on (seed, index),
    # never on execution order or thread count
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(sim_index,))))


@lru_cache(maxsize=128)
def null_threshold(n: int, bandwidth: int, alpha: float, n_sims: int = 500, seed: int = 7) -> float:
    """(1 - alpha) empirical quantile of the max-|t| statistic over n_sims
    Gaussian white-noise series of length n. Deterministic given seed."""
    assert n_sims >= 100
    maxima = np.empty(n_sims)
    for i in range(n_sims):
        y = _null_rng(seed, i).standard_normal(n)
        _, _, t = scan_statistics(y, bandwidth)
        maxima[i] = np.max(np.abs(t))
    maxima.sort()
    k = max(math.ceil((1.0 - alpha) * n_sims), 1)
    return float(maxima[k - 1])

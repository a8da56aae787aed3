"""Generalized Hurst exponent estimation on three method variants.

mf-dhv: profile, historical-volatility weighted trend, windowed
variances of the detrended residual, q-order fluctuation function,
log-log slope per q. fs-mfa: the same pipeline after Fourier
denoising. mf-dfa: classic per-window polynomial detrending of the
profile as the baseline.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .fourier_denoise import denoise
from .series import Series

__all__ = [
    "MfaConfig",
    "FluctuationTable",
    "HurstProfile",
    "profile_series",
    "historical_volatility",
    "weighted_trend",
    "detrend",
    "window_variances",
    "fluctuation",
    "polynomial_detrend_variances",
    "hurst_profile",
    "default_q_grid",
    "default_scales",
]

METHODS = ("fs-mfa", "mf-dhv", "mf-dfa")

# a scale whose zero-variance windows exceed this fraction is dropped
DEGENERATE_WINDOW_FRACTION = 0.5

MIN_FIT_SCALES = 4


def default_q_grid() -> np.ndarray:
    """41 moment orders from -10 to 10 in steps of 0.5."""
    return np.linspace(-10.0, 10.0, 41)


def default_scales(n: int, lo: int = 16, count: int = 20) -> np.ndarray:
    """Log-spaced integer window sizes in [lo, n//4], deduplicated."""
    hi = n // 4
    if hi < lo:
        raise ValueError(f"series too short for scale range [{lo}, N/4]: N = {n}")
    raw = np.exp(np.linspace(np.log(lo), np.log(hi), count))
    scales = np.unique(np.round(raw).astype(np.int64))
    return scales[scales >= 4]


@dataclass(frozen=True)
class MfaConfig:
    method: str = "mf-dfa"
    q_grid: np.ndarray = field(default_factory=default_q_grid)
    scales: np.ndarray | None = None  # None defers to default_scales(N)
    vol_window: int = 16
    dfa_poly_order: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        q = np.asarray(self.q_grid, dtype=np.float64)
        if q.size == 0:
            raise ValueError("q_grid must be nonempty")
        object.__setattr__(self, "q_grid", q)
        if self.scales is not None:
            s = np.asarray(self.scales, dtype=np.int64)
            if np.any(np.diff(s) <= 0):
                raise ValueError("scales must be strictly increasing")
            if np.any(s < 4):
                raise ValueError("every scale must be at least 4")
            object.__setattr__(self, "scales", s)
        if self.vol_window < 2:
            raise ValueError("vol_window must be at least 2")
        if self.dfa_poly_order < 0:
            raise ValueError("dfa_poly_order must be nonnegative")


@dataclass(frozen=True)
class FluctuationTable:
    """F_q(s) on the (q, scale) grid; NaN marks a degenerate cell."""

    q_grid: np.ndarray
    scales: np.ndarray
    values: np.ndarray  # shape (len(q_grid), len(scales))

    def __post_init__(self):
        if self.values.shape != (len(self.q_grid), len(self.scales)):
            raise ValueError("fluctuation table shape does not match its axes")


@dataclass(frozen=True)
class HurstProfile:
    """Per-q slope fits of ln F_q(s) on ln s, with the source table."""

    method: str
    q_grid: np.ndarray
    hurst: np.ndarray
    intercept: np.ndarray
    r_squared: np.ndarray
    table: FluctuationTable
    degenerate_scales: np.ndarray
    config: MfaConfig

    def to_json(self) -> str:
        with np.errstate(divide="ignore", invalid="ignore"):
            logf = np.where(self.table.values > 0, np.log(self.table.values), np.nan)

        def listify(arr):
            return [None if not np.isfinite(v) else float(v) for v in arr]

        payload = {
            "format_version": 1,
            "method": self.method,
            "q": [float(q) for q in self.q_grid],
            "H": listify(self.hurst),
            "r2": listify(self.r_squared),
            "scales": [int(s) for s in self.table.scales],
            "logF": [listify(row) for row in logf],
            "degenerate_scales": [int(s) for s in self.degenerate_scales],
        }
        return json.dumps(payload, indent=2)


def profile_series(s: Series) -> Series:
    """Cumulative sum of deviations from the mean."""
    if len(s) < 2:
        raise ValueError("need at least 2 samples to build a profile")
    return Series(np.cumsum(s.values - s.values.mean()))


def historical_volatility(y: Series, window: int) -> Series:
    """Trailing population std of first differences.

    theta_i covers the `window` differences ending at position i, so it
    is defined from position window+1 onward (1-based); earlier
    positions carry the first defined value so downstream weights are
    total.
    """
    n = len(y)
    if window < 2:
        raise ValueError("window must be at least 2")
    if n <= window:
        raise ValueError(f"need more than window = {window} samples, got {n}")
    diffs = np.diff(y.values)
    windows = sliding_window_view(diffs, window)
    vol = windows.std(axis=1)
    theta = np.empty(n)
    theta[window:] = vol
    theta[:window] = vol[0]
    return Series(theta)


def weighted_trend(y: Series, theta: Series, s: int) -> Series:
    """Volatility-weighted recursive trend.

    Seeded at position 2s-1 with the mean of Y over [s, 2s-1]; from
    position 2s on, the trend is the convex combination
    (sum of the previous s volatilities) * previous + theta_i * Y_i,
    normalized by their total. Zero total volatility carries the
    previous value. Positions before the seed hold the seed value so
    the output aligns with Y.
    """
    n = len(y)
    if len(theta) != n:
        raise ValueError("y and theta lengths differ")
    if n < 4 * s:
        raise ValueError(f"need N >= 4s = {4 * s}, got {n}")
    yv = y.values
    th = theta.values
    if np.any(th < 0):
        raise ValueError("volatilities must be nonnegative")
    trend = np.empty(n)
    seed = yv[s - 1 : 2 * s - 1].mean()  # positions s..2s-1, 1-based
    trend[: 2 * s - 1] = seed
    cumsum = np.concatenate([[0.0], np.cumsum(th)])
    prev = seed
    for i in range(2 * s - 1, n):  # 1-based positions 2s..N
        w_prev = cumsum[i] - cumsum[i - s]
        w_cur = th[i]
        total = w_prev + w_cur
        if total > 0:
            prev = (w_prev * prev + w_cur * yv[i]) / total
        trend[i] = prev
    return Series(trend)


def detrend(y: Series, trend: Series, s: int) -> Series:
    """Residual trend - Y on the valid range [2s, N], length N-2s+1."""
    n = len(y)
    if len(trend) != n:
        raise ValueError("y and trend lengths differ")
    if n < 2 * s:
        raise ValueError(f"need N >= 2s = {2 * s}, got {n}")
    return Series(trend.values[2 * s - 1 :] - y.values[2 * s - 1 :])


def window_variances(d: Series, s: int) -> np.ndarray:
    """Mean of squares per non-overlapping width-s window, tail dropped."""
    n = len(d)
    if n < s:
        raise ValueError(f"need at least s = {s} samples, got {n}")
    w = n // s
    segments = d.values[: w * s].reshape(w, s)
    return np.mean(segments**2, axis=1)


def fluctuation(variances: np.ndarray, q: float) -> float:
    """q-order fluctuation function over window variances.

    q != 0: [mean((sigma^2)^(q/2))]^(1/q). q = 0: the geometric-mean
    limit exp(mean(ln sigma^2)/2). Returns NaN as a degenerate flag
    when q <= 0 meets a zero variance, where the moment is undefined.
    """
    v = np.asarray(variances, dtype=np.float64)
    if v.size < 1:
        raise ValueError("need at least one window variance")
    if np.any(v < 0):
        raise ValueError("variances must be nonnegative")
    if q == 0:
        if np.any(v == 0):
            return float("nan")
        return float(np.exp(0.5 * np.mean(np.log(v))))
    if q < 0 and np.any(v == 0):
        return float("nan")
    with np.errstate(divide="ignore"):
        moment = np.mean(v ** (q / 2.0))
    return float(moment ** (1.0 / q))


def polynomial_detrend_variances(y: Series, s: int, order: int) -> np.ndarray:
    """Mean squared residual of a per-window least-squares polynomial."""
    if s <= order + 1:
        raise ValueError(f"need s > order+1 = {order + 1}, got s = {s}")
    n = len(y)
    if n < s:
        raise ValueError(f"need at least s = {s} samples, got {n}")
    w = n // s
    segments = y.values[: w * s].reshape(w, s)
    X = np.vander(np.arange(s, dtype=np.float64), order + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(X, segments.T, rcond=None)
    residuals = segments.T - X @ coef
    return np.mean(residuals**2, axis=0)


def _variances_for_scale(y: Series, theta: Series | None, s: int, cfg: MfaConfig) -> np.ndarray:
    if cfg.method == "mf-dfa":
        return polynomial_detrend_variances(y, s, cfg.dfa_poly_order)
    trend = weighted_trend(y, theta, s)
    return window_variances(detrend(y, trend, s), s)


def _fit_loglog(log_s: np.ndarray, log_f: np.ndarray) -> tuple[float, float, float]:
    """OLS slope, intercept, and R^2 of log F against log s."""
    slope, intercept = np.polyfit(log_s, log_f, 1)
    fitted = slope * log_s + intercept
    ss_res = float(np.sum((log_f - fitted) ** 2))
    ss_tot = float(np.sum((log_f - log_f.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    return float(slope), float(intercept), r2


def hurst_profile(s: Series, cfg: MfaConfig | None = None) -> HurstProfile:
    """Full estimator: variances per scale, F_q(s) table, per-q slopes.

    Zero-variance windows are excluded from the moment for q <= 0 and
    the affected scale is flagged; a scale where more than half the
    windows are degenerate is dropped for every q. Each q needs at
    least 4 surviving scales, otherwise its H is NaN.
    """
    cfg = cfg or MfaConfig()
    n = len(s)
    scales = cfg.scales if cfg.scales is not None else default_scales(n)
    if scales.size == 0:
        raise ValueError("no usable scales")
    max_scale = int(scales[-1])
    if n < 4 * max_scale:
        raise ValueError(f"need N >= 4*max(scales) = {4 * max_scale}, got N = {n}")

    work = s
    if cfg.method == "fs-mfa":
        work, _, _ = denoise(work)
    y = profile_series(work)
    theta = None
    if cfg.method in ("fs-mfa", "mf-dhv"):
        theta = historical_volatility(y, cfg.vol_window)

    per_scale = [_variances_for_scale(y, theta, int(sc), cfg) for sc in scales]
    dropped = np.array(
        [np.mean(v == 0) > DEGENERATE_WINDOW_FRACTION for v in per_scale], dtype=bool
    )

    q_grid = cfg.q_grid
    table = np.full((q_grid.size, scales.size), np.nan)
    for j, (v, drop) in enumerate(zip(per_scale, dropped)):
        if drop:
            continue
        positive = v[v > 0]
        for i, q in enumerate(q_grid):
            table[i, j] = fluctuation(v if q > 0 else positive, float(q))

    log_scales = np.log(scales.astype(np.float64))
    hurst = np.full(q_grid.size, np.nan)
    intercept = np.full(q_grid.size, np.nan)
    r_squared = np.full(q_grid.size, np.nan)
    for i in range(q_grid.size):
        row = table[i]
        ok = np.isfinite(row) & (row > 0)
        if int(ok.sum()) < MIN_FIT_SCALES:
            continue
        hurst[i], intercept[i], r_squared[i] = _fit_loglog(log_scales[ok], np.log(row[ok]))

    return HurstProfile(
        method=cfg.method,
        q_grid=q_grid,
        hurst=hurst,
        intercept=intercept,
        r_squared=r_squared,
        table=FluctuationTable(q_grid=q_grid, scales=scales, values=table),
        degenerate_scales=scales[dropped],
        config=cfg,
    )

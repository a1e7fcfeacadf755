"""Windowed aggregation, tail curves and kurtosis sweeps for return panels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import EmptyResult, MfrpError, ZeroVariance
from .model import simulate

GAUSSIAN_3SIGMA_EXCEEDANCE = float(1.0 - ndtr(3.0))


@dataclass(frozen=True)
class WindowedSeries:
    values: np.ndarray
    window: int


@dataclass(frozen=True)
class TailCurve:
    thresholds: np.ndarray
    exceedance_prob: np.ndarray

    @property
    def gaussian(self):
        """Exceedance of a standard normal at the same thresholds."""
        return 1.0 - ndtr(self.thresholds)


def aggregate_windows(series, window):
    """Non-overlapping window sums; the trailing remainder is dropped."""
    series = np.asarray(series, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    n = series.shape[0] // window
    if n == 0:
        raise EmptyResult(f"series of length {series.shape[0]} is shorter than window {window}")
    if window == 1:
        return WindowedSeries(series.copy(), 1)
    values = series[: n * window].reshape((n, window) + series.shape[1:]).sum(axis=1)
    return WindowedSeries(values, window)


def excess_kurtosis(series, axis=0):
    """Population (bias-uncorrected) fourth standardised moment minus 3."""
    x = np.asarray(series, dtype=float)
    if x.shape[axis] < 4:
        raise ValueError("need at least 4 observations")
    d = x - x.mean(axis=axis, keepdims=True)
    m2 = np.mean(d * d, axis=axis)
    if np.any(m2 <= 0):
        raise ZeroVariance("series has zero variance")
    m4 = np.mean((d * d) ** 2, axis=axis)
    return m4 / (m2 * m2) - 3.0


def upper_tail(series, n_points=50, thresholds=None):
    """Empirical exceedance P(X > u) of the standardised series.

    By default ``u`` runs over ``n_points`` log-spaced values from the median to
    the maximum of the standardised data.
    """
    x = np.asarray(series, dtype=float)
    if x.shape[0] < 100:
        raise ValueError("need at least 100 observations for a tail curve")
    sd = x.std()
    if sd <= 0:
        raise ZeroVariance("series has zero variance")
    z = np.sort((x - x.mean()) / sd)
    if thresholds is None:
        lo = max(float(np.percentile(z, 50)), 1e-3)
        hi = float(z[-1])
        thresholds = np.geomspace(lo, hi, n_points) if hi > lo else np.array([lo])
    thresholds = np.asarray(thresholds, dtype=float)
    above = z.shape[0] - np.searchsorted(z, thresholds, side="right")
    return TailCurve(thresholds, above / z.shape[0])


@dataclass(frozen=True)
class KurtosisRow:
    n_random: int
    alpha: float
    window: int
    mean_kurtosis: float
    std_kurtosis: float


def panel_kurtosis(returns, windows):
    """Asset-averaged excess kurtosis of the window sums, one value per window."""
    return {w: float(np.mean(excess_kurtosis(aggregate_windows(returns, w).values))) for w in windows}


def sweep_kurtosis(configs, windows=(1, 10, 100), n_realizations=10):
    """Kurtosis per (config, window), averaged over assets then realisations.

    Realisation ``k`` of a config runs with seed ``config.seed + k``.  The spread
    is the across-realisation standard deviation (ddof=1).
    """
    if n_realizations < 2:
        raise ValueError("n_realizations must be >= 2")
    rows = []
    for config in configs:
        per_real = {w: [] for w in windows}
        for k in range(n_realizations):
            try:
                panel = simulate(config.replace(seed=(config.seed + k) % 2**64))
            except MfrpError as exc:
                raise type(exc)(f"{exc} (R={config.n_random}, alpha={config.alpha}, realization {k})") from exc
            for w, value in panel_kurtosis(panel.returns, windows).items():
                per_real[w].append(value)
        for w in windows:
            vals = np.asarray(per_real[w])
            rows.append(KurtosisRow(config.n_random, config.alpha, w, float(vals.mean()), float(vals.std(ddof=1))))
    return rows

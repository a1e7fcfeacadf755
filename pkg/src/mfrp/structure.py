"""Structure functions S_q(tau) = <|Y(t + tau) - Y(t)|**q> and their scaling exponents.

Only positive moments are supported; negative q belongs to the WTMM side.
The ensemble average is a time average over every valid ``t`` of one series.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, DegenerateIncrements, InsufficientRange

DEFAULT_Q = tuple(np.round(np.arange(0.5, 5.0001, 0.5), 10).tolist())
STATIONARY_TOL = 0.05


@dataclass(frozen=True)
class SfTable:
    q_grid: np.ndarray
    tau_grid: np.ndarray
    log_sf: np.ndarray


@dataclass(frozen=True)
class ScalingFit:
    q: float
    exponent: float
    stderr: float
    fit_range: tuple
    r_squared: float


def default_lags(length, n=16, smallest=4, divisor=8):
    """``n`` log-spaced integer lags from ``smallest`` to ``length / divisor`` (duplicates removed)."""
    largest = max(length // divisor, smallest + 1)
    return np.unique(np.round(np.geomspace(smallest, largest, n)).astype(int))


def structure_function(series, q_grid=DEFAULT_Q, tau_grid=None):
    y = np.asarray(series, dtype=float)
    q = np.asarray(q_grid, dtype=float)
    if np.any(q <= 0):
        raise ConfigError("structure functions take positive moments only")
    tau = default_lags(y.shape[0]) if tau_grid is None else np.asarray(tau_grid, dtype=int)
    if tau.min() < 1:
        raise ConfigError("lags must be positive")
    if tau.max() > y.shape[0] / 4:
        raise ConfigError(f"largest lag {tau.max()} exceeds length/4 = {y.shape[0] / 4:g}")
    log_sf = np.empty((q.shape[0], tau.shape[0]))
    for k, t in enumerate(tau):
        d = np.abs(y[t:] - y[:-t])
        nz = d[d > 0]
        if nz.shape[0] == 0:
            raise DegenerateIncrements(f"all increments vanish at lag {t}")
        # zero increments contribute nothing for q > 0
        log_sf[:, k] = logsumexp(np.outer(q, np.log(nz)), axis=1) - np.log(d.shape[0])
    return SfTable(q, tau, log_sf)


def _line(x, y):
    n = x.shape[0]
    dx = x - x.mean()
    sxx = dx @ dx
    slope = (dx @ (y - y.mean())) / sxx
    resid = y - y.mean() - slope * dx
    sse = resid @ resid
    syy = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - sse / syy if syy > 0 else 1.0
    stderr = np.sqrt(sse / (n - 2) / sxx) if n > 2 else 0.0
    return slope, stderr, min(max(r2, 0.0), 1.0)


def fit_exponents(table, fit_range=None):
    """Least-squares slope of ``ln S_q`` against ``ln tau`` for each q.

    ``fit_range=(tau_min, tau_max)`` is inclusive; ``None`` uses the whole grid.
    """
    tau = table.tau_grid
    if fit_range is None:
        sel = np.ones(tau.shape[0], dtype=bool)
    else:
        sel = (tau >= fit_range[0]) & (tau <= fit_range[1])
    if sel.sum() < 3:
        raise InsufficientRange(f"need >= 3 lags inside {fit_range}, have {int(sel.sum())}")
    x = np.log(tau[sel].astype(float))
    rng = (int(tau[sel][0]), int(tau[sel][-1]))
    fits = []
    for q, row in zip(table.q_grid, table.log_sf):
        slope, err, r2 = _line(x, row[sel])
        fits.append(ScalingFit(float(q), float(slope), float(err), rng, float(r2)))
    return fits


def auto_fit_range(table, r2_min=0.98, min_points=4):
    """Widest lag window whose worst R^2 across q reaches ``r2_min``.

    Falls back to the window with the best worst-case R^2 if none qualifies.
    """
    tau = table.tau_grid
    x = np.log(tau.astype(float))
    best, best_key = None, None
    n = tau.shape[0]
    for i in range(n):
        for j in range(i + min_points - 1, n):
            r2 = min(_line(x[i : j + 1], row[i : j + 1])[2] for row in table.log_sf)
            key = (r2 >= r2_min, j - i if r2 >= r2_min else 0, r2, -i)
            if best_key is None or key > best_key:
                best, best_key = (int(tau[i]), int(tau[j])), key
    if best is None:
        raise InsufficientRange("lag grid too short for a fit")
    return best


def is_multifractal(fits, factor=3.0):
    """Nonlinearity test: does zeta(q) leave a straight line in q by > factor x stderr?"""
    q = np.array([f.q for f in fits])
    z = np.array([f.exponent for f in fits])
    err = np.array([f.stderr for f in fits])
    coef = np.polyfit(q, z, 1)
    resid = z - np.polyval(coef, q)
    agg = float(np.sqrt(np.mean(err * err)))
    return bool(np.max(np.abs(resid)) > factor * max(agg, 1e-12))


def stationarity_check(returns, q_grid=(1.0, 2.0, 3.0), tau_grid=None, tol=STATIONARY_TOL):
    """True iff every fitted exponent of the (return) series is below ``tol`` in magnitude."""
    fits = fit_exponents(structure_function(returns, q_grid, tau_grid))
    return all(abs(f.exponent) < tol for f in fits), fits

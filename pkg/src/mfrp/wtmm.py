"""Wavelet Transform Modulus Maxima: maxima lines, partition functions, D(h).

For each scale the modulus maxima of the CWT are chained into lines from the
smallest scale upwards.  Each line carries the running supremum of its modulus,
which is the value used in the partition functions (this keeps negative
moments finite).  With normalised weights

    w_i(q, tau) = |T_i|**q / sum_j |T_j|**q

the partition functions are ``Z(q, tau) = sum_i w_i ln|T_i|`` and
``Z*(q, tau) = sum_i w_i ln w_i``; ``h(q)`` and ``D(q)`` are their slopes
against ``ln tau`` over the scaling range.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import cwt as _cwt
from .errors import MfrpError, InsufficientLines, NoMaxima, InsufficientRange, PoorFitWarning

MODULUS_FLOOR = 1e-12
# coefficients this small relative to the input amplitude are rounding noise
NEGLIGIBLE = 1e-9
DEFAULT_Q = np.round(np.arange(-5.0, 5.0001, 0.5), 10)
SUMMARY_QMAX = 3.0
MIN_LINES = 32
R2_MIN = 0.95
# additive shift applied to every h(q); fixed against the H=0.5 fBm oracle
# (see ``calibrate``).  Zero because the 1/tau normalisation already yields
# |T| ~ tau**h and the measured residual is well inside the fit scatter.
CALIBRATION = 0.0


@dataclass(frozen=True)
class MaximaLine:
    scale_index: np.ndarray
    scales: np.ndarray
    positions: np.ndarray
    moduli: np.ndarray
    sup_modulus: np.ndarray

    @property
    def points(self):
        return list(zip(self.scales.tolist(), self.positions.tolist(), self.moduli.tolist()))

    def __len__(self):
        return self.scales.shape[0]


@dataclass(frozen=True)
class PartitionTable:
    q_grid: np.ndarray
    tau_grid: np.ndarray
    z: np.ndarray
    z_star: np.ndarray
    counts: np.ndarray

    @property
    def valid(self):
        return self.counts >= 2


@dataclass(frozen=True)
class SingularitySpectrum:
    q: np.ndarray
    h: np.ndarray
    h_stderr: np.ndarray
    d: np.ndarray
    d_stderr: np.ndarray
    h_r2: np.ndarray
    fit_range: tuple
    calibration: float = 0.0
    summary_qmax: float = SUMMARY_QMAX

    @property
    def h_of_q(self):
        return {float(q): (float(h), float(e)) for q, h, e in zip(self.q, self.h, self.h_stderr)}

    @property
    def d_of_q(self):
        return {float(q): (float(d), float(e)) for q, d, e in zip(self.q, self.d, self.d_stderr)}

    def _within(self, qmax):
        return np.abs(self.q) <= qmax + 1e-12

    @property
    def h_left(self):
        return float(np.min(self.h))

    @property
    def h_right(self):
        return float(np.max(self.h))

    @property
    def h_top(self):
        return float(self.h[int(np.argmax(self.d))])

    @property
    def d_top(self):
        return float(np.max(self.d))

    @property
    def width(self):
        """Spread of h over the whole tabulated q grid."""
        return self.h_right - self.h_left

    def width_within(self, qmax=SUMMARY_QMAX):
        sel = self._within(qmax)
        return float(np.max(self.h[sel]) - np.min(self.h[sel]))

    @property
    def hurst(self):
        return float(np.interp(2.0, self.q, self.h))

    def summary(self):
        return {
            "h_l": self.h_left,
            "h0": self.h_top,
            "h_r": self.h_right,
            "width": self.width,
            "width_q3": self.width_within(self.summary_qmax),
            "hurst": self.hurst,
            "d_top": self.d_top,
        }


@dataclass(frozen=True)
class WtmmSettings:
    order: int = 4
    q_grid: tuple = tuple(DEFAULT_Q.tolist())
    scales: tuple | None = None
    fit_range: tuple | None = None
    calibration: float = CALIBRATION
    min_octaves: float = 1.5
    r2_min: float = R2_MIN
    min_lines: int = MIN_LINES
    link_factor: float = 1.0
    min_line_length: int = 3


# -- maxima -------------------------------------------------------------------


def _row_maxima(row, allowed):
    """Strict local maxima of ``row``; a plateau contributes its leftmost point."""
    n = row.shape[0]
    if n < 3:
        return np.empty(0, dtype=int)
    # run-length compress equal neighbours
    starts = np.flatnonzero(np.concatenate([[True], row[1:] != row[:-1]]))
    vals = row[starts]
    if vals.shape[0] < 3:
        return np.empty(0, dtype=int)
    peak = np.flatnonzero((vals[1:-1] > vals[:-2]) & (vals[1:-1] > vals[2:])) + 1
    pos = starts[peak]
    return pos[allowed[pos]]


def find_maxima(field):
    """Per-scale arrays of modulus-maximum positions outside the cone of influence.

    Positions whose modulus is below ``1e-12`` times the largest unmasked modulus
    are ignored.  A scale without maxima yields an empty array.
    """
    mod = field.modulus
    inside = ~field.border_mask
    top = mod[inside].max() if inside.any() else 0.0
    floor = MODULUS_FLOOR * top
    out = []
    for i in range(mod.shape[0]):
        allowed = inside[i] & (mod[i] > floor)
        out.append(_row_maxima(mod[i], allowed) if top > 0 else np.empty(0, dtype=int))
    return out


# -- chaining -----------------------------------------------------------------


@njit(cache=True)
def _greedy(order, cand_new, cand_tip, n_new, n_tips):
    match = np.full(n_new, -1, dtype=np.int64)
    tip_used = np.zeros(n_tips, dtype=np.bool_)
    for k in order:
        i, j = cand_new[k], cand_tip[k]
        if match[i] < 0 and not tip_used[j]:
            match[i] = j
            tip_used[j] = True
    return match


def _link(tips, new, window, n_candidates=2):
    """Greedy one-to-one nearest-neighbour matching of new maxima to line tips.

    Pairs are claimed in order of increasing distance (ties: leftmost new
    maximum, then leftmost tip).  Returns the matched tip index or -1 for
    every new maximum.
    """
    if tips.shape[0] == 0 or new.shape[0] == 0:
        return np.full(new.shape[0], -1, dtype=np.int64)
    at = np.searchsorted(tips, new)
    offs = np.arange(-n_candidates, n_candidates)
    idx = at[:, None] + offs[None, :]
    ok = (idx >= 0) & (idx < tips.shape[0])
    cand_new = np.nonzero(ok)[0]
    cand_tip = idx[ok]
    dist = np.abs(tips[cand_tip] - new[cand_new])
    keep = dist <= window
    cand_new, cand_tip, dist = cand_new[keep], cand_tip[keep], dist[keep]
    order = np.lexsort((cand_tip, cand_new, dist))
    return _greedy(order, cand_new, cand_tip, new.shape[0], tips.shape[0])


def chain_maxima(field, maxima=None, link_factor=1.0, min_length=3):
    """Link per-scale maxima into lines running from small to large scales.

    A maximum at the next scale joins the nearest still-unclaimed line tip within
    ``ceil(link_factor * scale)`` samples; unmatched maxima start new lines and
    unmatched tips end.  Lines spanning fewer than ``min_length`` scales are
    dropped.
    """
    if maxima is None:
        maxima = find_maxima(field)
    mod = field.modulus
    scales = field.scales
    n_lines = 0
    tips_pos = np.empty(0, dtype=np.int64)
    tips_line = np.empty(0, dtype=np.int64)
    tips_sup = np.empty(0)
    cols = {"s": [], "pos": [], "val": [], "sup": [], "line": []}
    for s, pos in enumerate(maxima):
        pos = np.asarray(pos, dtype=np.int64)
        vals = mod[s, pos]
        window = math.ceil(link_factor * scales[s])
        match = _link(tips_pos, pos, window)
        linked = match >= 0
        line_of = np.empty(pos.shape[0], dtype=np.int64)
        line_of[linked] = tips_line[match[linked]]
        fresh = np.flatnonzero(~linked)
        line_of[fresh] = n_lines + np.arange(fresh.shape[0])
        n_lines += fresh.shape[0]
        sup = vals.copy()
        sup[linked] = np.maximum(vals[linked], tips_sup[match[linked]])
        for key, arr in zip(cols, (np.full(pos.shape[0], s), pos, vals, sup, line_of)):
            cols[key].append(arr)
        tips_pos, tips_line, tips_sup = pos, line_of, sup
    if n_lines == 0:
        return []
    flat = {k: np.concatenate(v) for k, v in cols.items()}
    length = np.bincount(flat["line"], minlength=n_lines)
    keep = length[flat["line"]] >= min_length
    flat = {k: v[keep] for k, v in flat.items()}
    # points were appended scale by scale, so a stable sort keeps scales ascending
    order = np.argsort(flat["line"], kind="stable")
    flat = {k: v[order] for k, v in flat.items()}
    cuts = np.flatnonzero(np.diff(flat["line"])) + 1
    parts = {k: np.split(v, cuts) for k, v in flat.items()}
    return [
        MaximaLine(si, scales[si], p, v, sp)
        for si, p, v, sp in zip(parts["s"], parts["pos"], parts["val"], parts["sup"])
    ]


# -- partition functions ------------------------------------------------------


def _weighted_sums(values, q):
    """``Z`` and ``Z*`` for one scale, vectorised over ``q``."""
    logv = np.log(values)
    lw = np.outer(q, logv)
    lw -= lw.max(axis=1, keepdims=True)
    norm = np.log(np.exp(lw).sum(axis=1, keepdims=True))
    logw = lw - norm
    w = np.exp(logw)
    return (w * logv).sum(axis=1), (w * logw).sum(axis=1)


def partition_functions(lines, q_grid, tau_grid):
    """Partition functions over the line suprema at every scale of ``tau_grid``.

    Scales crossed by fewer than two lines are left as NaN (dropped from fits).
    """
    q = np.asarray(q_grid, dtype=float)
    tau = np.asarray(tau_grid, dtype=float)
    z = np.full((q.shape[0], tau.shape[0]), np.nan)
    zs = np.full_like(z, np.nan)
    if lines:
        idx = np.concatenate([ln.scale_index for ln in lines])
        sup = np.concatenate([ln.sup_modulus for ln in lines])
    else:
        idx, sup = np.empty(0, dtype=int), np.empty(0)
    counts = np.bincount(idx, minlength=tau.shape[0])[: tau.shape[0]]
    order = np.argsort(idx, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(counts)])
    sup = sup[order]
    for s in range(tau.shape[0]):
        if counts[s] < 2:
            continue
        z[:, s], zs[:, s] = _weighted_sums(sup[bounds[s] : bounds[s + 1]], q)
    return PartitionTable(q, tau, z, zs, counts)


# -- fitting ------------------------------------------------------------------


def _window_stats(x, y):
    """Slope, stderr and R^2 of least-squares lines of each row of ``y`` on ``x``."""
    n = x.shape[0]
    xm = x.mean()
    dx = x - xm
    sxx = np.dot(dx, dx)
    ym = y.mean(axis=-1, keepdims=True)
    dy = y - ym
    sxy = dy @ dx
    slope = sxy / sxx
    resid = dy - slope[..., None] * dx
    sse = (resid * resid).sum(axis=-1)
    syy = (dy * dy).sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = np.where(syy > 0, 1.0 - sse / syy, 1.0)
        stderr = np.sqrt(sse / max(n - 2, 1) / sxx)
    return slope, stderr, r2


def _prefix_r2(x, y):
    """min-over-rows R^2 for every window [i, j] via prefix sums; shape (S, S)."""
    s = x.shape[0]
    cx = np.concatenate([[0.0], np.cumsum(x)])
    cxx = np.concatenate([[0.0], np.cumsum(x * x)])
    cy = np.concatenate([np.zeros((y.shape[0], 1)), np.cumsum(y, axis=1)], axis=1)
    cyy = np.concatenate([np.zeros((y.shape[0], 1)), np.cumsum(y * y, axis=1)], axis=1)
    cxy = np.concatenate([np.zeros((y.shape[0], 1)), np.cumsum(y * x, axis=1)], axis=1)
    i, j = np.triu_indices(s, 1)
    n = (j - i + 1).astype(float)
    sx = cx[j + 1] - cx[i]
    sxx = cxx[j + 1] - cxx[i] - sx * sx / n
    sy = cy[:, j + 1] - cy[:, i]
    syy = cyy[:, j + 1] - cyy[:, i] - sy * sy / n
    sxy = cxy[:, j + 1] - cxy[:, i] - sx * sy / n
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = np.where(syy > 0, sxy * sxy / (sxx * syy), 1.0)
    out = np.full((s, s), -np.inf)
    out[i, j] = r2.min(axis=0)
    return out


def auto_fit_range(table, min_octaves=1.5, r2_min=R2_MIN, min_lines=MIN_LINES, qmax=2.0):
    """Widest contiguous scale window whose worst R^2 over ``|q| <= qmax`` reaches ``r2_min``.

    Candidates span at least ``min_octaves`` octaves inside the longest run of
    scales where every partition function is defined and at least
    ``min_lines`` maxima lines cross (large-q sums over a handful of lines
    are not reliable).  If no window reaches ``r2_min`` the bar drops to the
    best achievable worst-case R^2.  Ties go to the better R^2, then to the
    smaller scales.
    """
    tau = table.tau_grid
    ok = (table.counts >= max(min_lines, 2)) & np.all(np.isfinite(table.z), axis=0) & np.all(np.isfinite(table.z_star), axis=0)
    # longest contiguous run of usable scales
    runs, k = [], 0
    while k < tau.shape[0]:
        if ok[k]:
            j = k
            while j < tau.shape[0] and ok[j]:
                j += 1
            runs.append((k, j))
            k = j
        else:
            k += 1
    if not runs:
        raise InsufficientRange("no usable scales")
    start, stop = max(runs, key=lambda r: r[1] - r[0])
    x = np.log(tau[start:stop])
    sel = np.abs(table.q_grid) <= qmax + 1e-12
    r2 = _prefix_r2(x, table.z[sel][:, start:stop])
    span = (x[None, :] - x[:, None]) / math.log(2.0)
    r2[span < min_octaves - 1e-9] = -np.inf
    if not np.isfinite(r2).any():
        raise InsufficientRange(
            f"usable scales [{tau[start]:g}, {tau[stop - 1]:g}] span less than {min_octaves} octaves"
        )
    target = min(r2_min, r2.max())
    i, j = np.nonzero(r2 >= target)
    width = j - i
    pick = np.lexsort((i, -r2[i, j], -width))[0]
    return float(tau[start + i[pick]]), float(tau[start + j[pick]])


def fit_spectrum(
    table, fit_range=None, calibration=CALIBRATION, min_octaves=1.5, r2_min=R2_MIN, min_lines=MIN_LINES
):
    """Slopes of ``Z`` and ``Z*`` against ``ln tau`` give ``h(q)`` and ``D(q)``.

    ``fit_range`` is ``(tau_min, tau_max)`` inclusive; ``None`` selects it with
    :func:`auto_fit_range`.  ``calibration`` is added to every ``h(q)``.
    """
    if fit_range is None:
        fit_range = auto_fit_range(table, min_octaves, r2_min, min_lines)
    lo, hi = fit_range
    tau = table.tau_grid
    sel = (tau >= lo * (1 - 1e-9)) & (tau <= hi * (1 + 1e-9))
    sel &= table.valid & np.all(np.isfinite(table.z), axis=0)
    if sel.sum() < 4:
        raise InsufficientRange(f"only {int(sel.sum())} usable scales inside [{lo:g}, {hi:g}]")
    x = np.log(tau[sel])
    h, h_err, h_r2 = _window_stats(x, table.z[:, sel])
    d, d_err, _ = _window_stats(x, table.z_star[:, sel])
    q = table.q_grid
    core = np.abs(q) <= 2.0 + 1e-12
    if np.any(h_r2[core] < 0.9):
        warnings.warn(
            f"partition-function fit R^2 down to {h_r2[core].min():.3f} inside |q| <= 2",
            PoorFitWarning,
            stacklevel=2,
        )
    return SingularitySpectrum(
        q=q.copy(),
        h=h + calibration,
        h_stderr=h_err,
        d=d,
        d_stderr=d_err,
        h_r2=h_r2,
        fit_range=(float(tau[sel][0]), float(tau[sel][-1])),
        calibration=calibration,
    )


@dataclass
class SeriesAnalysis:
    field: _cwt.CwtField
    lines: list
    table: PartitionTable
    spectrum: SingularitySpectrum


def analyze_series(series, settings=WtmmSettings(), keep=False):
    """Full pipeline for one (price-like) series: CWT -> maxima -> lines -> D(h)."""
    y = np.asarray(series, dtype=float)
    scales = settings.scales if settings.scales is not None else _cwt.default_scales(y.shape[0])
    field = _cwt.transform(y, _cwt.DogWavelet(settings.order), scales)
    inside = ~field.border_mask
    signal = np.abs(y).max()
    if not inside.any() or field.modulus[inside].max() <= NEGLIGIBLE * signal:
        raise NoMaxima(
            f"wavelet coefficients vanish (series is constant or a polynomial of degree < {settings.order})"
        )
    lines = chain_maxima(field, link_factor=settings.link_factor, min_length=settings.min_line_length)
    if not lines:
        raise InsufficientLines("no maxima lines survived chaining")
    table = partition_functions(lines, settings.q_grid, field.scales)
    spectrum = fit_spectrum(
        table,
        settings.fit_range,
        settings.calibration,
        settings.min_octaves,
        settings.r2_min,
        settings.min_lines,
    )
    if keep:
        return SeriesAnalysis(field, lines, table, spectrum)
    return spectrum


@dataclass
class PanelSpectra:
    spectra: list
    aggregate: dict = field(default_factory=dict)


SUMMARY_KEYS = ("h_l", "h0", "h_r", "width", "width_q3", "hurst", "d_top")


def aggregate_spectra(spectra):
    rows = np.array([[s.summary()[k] for k in SUMMARY_KEYS] for s in spectra])
    mean = rows.mean(axis=0)
    std = rows.std(axis=0, ddof=1) if rows.shape[0] > 1 else np.zeros_like(mean)
    return {k: (float(m), float(sd)) for k, m, sd in zip(SUMMARY_KEYS, mean, std)}


def analyze_panel(panel, settings=WtmmSettings(), assets=None):
    """WTMM spectrum of every asset's price series plus mean/std of the summary points."""
    prices = panel.prices
    assets = range(prices.shape[1]) if assets is None else assets
    spectra = []
    for a in assets:
        try:
            spectra.append(analyze_series(prices[:, a], settings))
        except MfrpError as exc:
            exc.args = (f"asset {a}: {exc}",) + exc.args[1:]
            raise
    return PanelSpectra(spectra, aggregate_spectra(spectra))


def calibrate(n_seeds=10, length=2**15, settings=WtmmSettings(calibration=0.0)):
    """Offset ``0.5 - mean hurst`` measured on H=0.5 fBm oracles, with its standard error."""
    from .oracles import FbmSpec, generate_fbm

    h = np.array([analyze_series(generate_fbm(FbmSpec(0.5, length, s)), settings).hurst for s in range(n_seeds)])
    err = h.std(ddof=1) / math.sqrt(n_seeds) if n_seeds > 1 else float("nan")
    return float(0.5 - h.mean()), float(err)

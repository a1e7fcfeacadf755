"""Random Parameters model of correlated asset returns.

Asset moments are derived from an ``N x P`` matrix of "typical state" vectors:
``M`` main vectors that follow a mean-reverting Gaussian walk and ``R``
pseudo-parameter vectors redrawn every step with the per-asset variance of the
previous step.  Returns are drawn from the resulting multivariate normal.

Randomness is split into four independent streams spawned from the config
seed (initial state, main-vector noise, pseudo-vector noise, return noise), so
the vectorised :func:`simulate` and a step-by-step loop over the public
operations consume identical numbers.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit
from scipy.signal import lfilter

from .errors import (
    ConfigError,
    DegenerateVariance,
    FactorizationFailure,
    NonPositiveVariance,
)

VARIANCE_FLOOR = 1e-30
EIGEN_FLOOR = 1e-12
# relative negative eigenvalue beyond which a covariance is rejected as indefinite
INDEFINITE_TOL = 1e-8

MAIN_ONLY = "main"
ALL_COLUMNS = "all"


def derive_sigma_eps(alpha, target_var=1.0):
    """Noise level keeping the stationary variance of main entries at ``target_var``.

    The mean-reverting walk ``x' = (1 - alpha) x + sigma_eps * z`` has fixed-point
    variance ``sigma_eps**2 / (2 alpha - alpha**2)``; this inverts it.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    if target_var <= 0:
        raise ConfigError(f"target_var must be positive, got {target_var}")
    return math.sqrt(target_var * (2.0 * alpha - alpha * alpha))


@dataclass(frozen=True)
class ModelConfig:
    n_assets: int = 10
    n_main: int = 5
    n_random: int = 0
    alpha: float = 0.0
    sigma_eps: float = 0.0
    target_var: float = 1.0
    n_steps: int = 2**15
    transient: int = 2**14
    seed: int = 0
    # which columns define the sampling moments when n_random > 0
    moments: str = ALL_COLUMNS
    # variance source for pseudo-vectors: previous "effective" or "main"-only diagonal
    pseudo_variance: str = "effective"

    def __post_init__(self):
        if self.n_assets < 1:
            raise ConfigError("n_assets must be positive")
        if self.n_main < 2:
            raise ConfigError("n_main must be >= 2 (a single main vector has zero covariance)")
        if self.n_random < 0:
            raise ConfigError("n_random must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.sigma_eps < 0:
            raise ConfigError("sigma_eps must be non-negative")
        if self.target_var <= 0:
            raise ConfigError("target_var must be positive")
        if self.n_steps < 1 or self.transient < 0:
            raise ConfigError("n_steps must be positive and transient non-negative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.moments not in (MAIN_ONLY, ALL_COLUMNS):
            raise ConfigError(f"unknown moments mode {self.moments!r}")
        if self.pseudo_variance not in ("effective", "main"):
            raise ConfigError(f"unknown pseudo_variance mode {self.pseudo_variance!r}")

    @classmethod
    def variance_locked(cls, alpha, **kwargs):
        """Config whose ``sigma_eps`` is derived from ``alpha`` and ``target_var``."""
        target_var = kwargs.get("target_var", 1.0)
        return cls(alpha=alpha, sigma_eps=derive_sigma_eps(alpha, target_var), **kwargs)

    @property
    def n_columns(self):
        return self.n_main + self.n_random

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class PhiMatrix:
    """State vectors as columns; the first ``n_main`` are the main vectors."""

    values: np.ndarray
    n_main: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ConfigError("phi must be a 2-D matrix")
        if not 1 <= self.n_main <= values.shape[1]:
            raise ConfigError("n_main out of range for phi")
        if not np.all(np.isfinite(values)):
            raise ConfigError("phi entries must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_assets(self):
        return self.values.shape[0]

    @property
    def n_random(self):
        return self.values.shape[1] - self.n_main

    @property
    def main(self):
        return self.values[:, : self.n_main]

    @property
    def pseudo(self):
        return self.values[:, self.n_main :]

    def with_main(self, main):
        return PhiMatrix(np.concatenate([main, self.pseudo], axis=1), self.n_main)

    def with_pseudo(self, pseudo):
        return PhiMatrix(np.concatenate([self.main, pseudo], axis=1), self.n_main)


@dataclass(frozen=True)
class MomentPair:
    mean: np.ndarray
    covariance: np.ndarray
    correlation: np.ndarray


@dataclass(frozen=True)
class ReturnPanel:
    returns: np.ndarray
    prices: np.ndarray
    config: ModelConfig

    @classmethod
    def from_returns(cls, returns, config):
        returns = np.asarray(returns, dtype=float)
        return cls(returns, np.cumsum(returns, axis=0), config)

    @property
    def n_assets(self):
        return self.returns.shape[1]

    def to_csv(self, path):
        """Write returns as CSV plus a ``.meta`` sidecar of ``key=value`` lines."""
        path = Path(path)
        n_assets = self.returns.shape[1]
        header = "t," + ",".join(f"asset_{i}" for i in range(n_assets))
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for t, row in enumerate(self.returns):
                fh.write(f"{t}," + ",".join(repr(float(v)) for v in row) + "\n")
        meta = path.with_name(path.name + ".meta")
        with open(meta, "w") as fh:
            for key, value in self.config.as_dict().items():
                fh.write(f"{key}={value}\n")
        return path

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        returns = data[:, 1:]
        meta = path.with_name(path.name + ".meta")
        config = read_config_sidecar(meta) if meta.exists() else ModelConfig(
            n_assets=returns.shape[1], n_steps=returns.shape[0], transient=0
        )
        return cls.from_returns(returns, config)


def read_config_sidecar(path):
    fields = {f.name: f.type for f in dataclasses.fields(ModelConfig)}
    kwargs = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip() or "=" not in line:
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in fields:
            continue
        kind = fields[key]
        if kind == "int":
            kwargs[key] = int(value)
        elif kind == "float":
            kwargs[key] = float(value)
        else:
            kwargs[key] = value
    return ModelConfig(**kwargs)


# -- per-step operations -----------------------------------------------------


def evolve_main_vectors(phi, alpha, sigma_eps, rng):
    """One mean-reverting step ``(1 - alpha) * phi + N(0, sigma_eps**2)`` of the main columns."""
    noise = rng.standard_normal(phi.main.shape)
    main = (1.0 - alpha) * phi.main + sigma_eps * noise
    return phi.with_main(main)


def main_vector_path(main0, alpha, sigma_eps, n_steps, rng):
    """Trajectory of ``n_steps`` mean-reverting updates of ``main0`` (shape ``(n_steps, *main0.shape)``).

    Same arithmetic and random consumption as repeated :func:`evolve_main_vectors`.
    """
    main0 = np.asarray(main0, dtype=float)
    noise = sigma_eps * rng.standard_normal((n_steps,) + main0.shape)
    zi = ((1.0 - alpha) * main0)[None]
    path, _ = lfilter([1.0], [1.0, -(1.0 - alpha)], noise, axis=0, zi=zi)
    return path


def draw_random_vectors(phi, prev_cov_diag, rng):
    """Redraw the pseudo-parameter columns from ``N(0, prev_cov_diag[i])`` per asset."""
    if phi.n_random == 0:
        return phi
    prev_cov_diag = np.asarray(prev_cov_diag, dtype=float)
    if np.any(prev_cov_diag <= 0):
        raise NonPositiveVariance("previous covariance diagonal must be strictly positive")
    z = rng.standard_normal(phi.pseudo.shape)
    return phi.with_pseudo(np.sqrt(prev_cov_diag)[:, None] * z)


def compute_moments(phi, normalization=MAIN_ONLY):
    """Mean, covariance and correlation implied by the columns of ``phi``.

    ``normalization="main"`` averages over the main columns only;
    ``"all"`` averages over every column with ``1/P`` weights.
    """
    if normalization == MAIN_ONLY:
        cols = phi.main
    elif normalization == ALL_COLUMNS:
        cols = phi.values
    else:
        raise ConfigError(f"unknown normalization {normalization!r}")
    k = cols.shape[1]
    if k < 2:
        raise ConfigError("at least two columns must participate in the moments")
    mean = cols.sum(axis=1) / k
    dev = cols - mean[:, None]
    cov = dev @ dev.T / k
    cov = 0.5 * (cov + cov.T)
    diag = np.diag(cov)
    if np.any(diag <= VARIANCE_FLOOR):
        bad = int(np.argmin(diag))
        raise DegenerateVariance(f"variance of asset {bad} is {diag[bad]:.3g}")
    sd = np.sqrt(diag)
    corr = np.clip(cov / np.outer(sd, sd), -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return MomentPair(mean, cov, corr)


def _repaired_factor(cov, step=None):
    """Square-root factor ``V sqrt(L)`` (``F F^T = cov``) with eigenvalue floor repair.

    Works on a single matrix or a stack of matrices along the leading axis.
    """
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    lam, vec = np.linalg.eigh(cov)
    top = lam[..., -1:]
    if np.any(lam[..., :1] < -INDEFINITE_TOL * np.maximum(top, 0.0) - VARIANCE_FLOOR):
        where = None
        if lam.ndim > 1:
            where = int(np.argmax((lam[..., 0] < -INDEFINITE_TOL * np.maximum(lam[..., -1], 0.0) - VARIANCE_FLOOR)))
        if step is not None and where is not None:
            step = step + where
        raise FactorizationFailure("covariance is indefinite beyond tolerance", step)
    floor = EIGEN_FLOOR * np.maximum(top, 0.0)
    lam = np.maximum(lam, floor)
    return vec * np.sqrt(lam)[..., None, :]


def sample_returns(mean, covariance, rng):
    """One draw from ``N(mean, covariance)`` through an eigen-repaired symmetric factor."""
    mean = np.asarray(mean, dtype=float)
    factor = _repaired_factor(np.asarray(covariance, dtype=float))
    z = rng.standard_normal(mean.shape[0])
    return mean + factor @ z


# -- full simulation ---------------------------------------------------------


def _streams(seed):
    ss = np.random.SeedSequence(int(seed))
    return [np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(4)]


def initial_phi(config, rng):
    """Main entries i.i.d. ``N(0, target_var)``; pseudo columns start at zero."""
    main = math.sqrt(config.target_var) * rng.standard_normal((config.n_assets, config.n_main))
    pseudo = np.zeros((config.n_assets, config.n_random))
    return PhiMatrix(np.concatenate([main, pseudo], axis=1), config.n_main)


@njit(cache=True)
def _moment_kernel(cols, mean, cov):
    n, k = cols.shape
    for i in range(n):
        s = 0.0
        for j in range(k):
            s += cols[i, j]
        mean[i] = s / k
    # centred (two-pass) sums: same value as E[xy] - E[x]E[y] without the
    # cancellation that hides an exactly vanishing variance
    for i in range(n):
        for l in range(i + 1):
            s = 0.0
            for j in range(k):
                s += (cols[i, j] - mean[i]) * (cols[l, j] - mean[l])
            c = s / k
            cov[i, l] = c
            cov[l, i] = c


@njit(cache=True)
def _run_recurrence(main0, alpha, sigma_eps, eps, z_pseudo, transient, use_all, pseudo_from_main):
    n_total = eps.shape[0]
    n, m = main0.shape
    r = z_pseudo.shape[2]
    p = m + r
    kept = n_total - transient
    means = np.empty((kept, n))
    covs = np.empty((kept, n, n))
    phi = np.zeros((n, p))
    for i in range(n):
        for j in range(m):
            phi[i, j] = main0[i, j]
    mean_main = np.empty(n)
    cov_main = np.empty((n, n))
    mean_eff = np.empty(n)
    cov_eff = np.empty((n, n))
    prev = np.empty(n)
    _moment_kernel(phi[:, :m], mean_main, cov_main)
    for i in range(n):
        prev[i] = cov_main[i, i]
    for t in range(n_total):
        for i in range(n):
            for j in range(m):
                phi[i, j] = (1.0 - alpha) * phi[i, j] + sigma_eps * eps[t, i, j]
        _moment_kernel(phi[:, :m], mean_main, cov_main)
        for i in range(n):
            if not cov_main[i, i] > 1e-30:
                return means, covs, t, i
        if r > 0:
            for i in range(n):
                if not prev[i] > 0.0:
                    return means, covs, t, i
                sd = np.sqrt(prev[i])
                for j in range(r):
                    phi[i, m + j] = sd * z_pseudo[t, i, j]
        if r > 0 and use_all:
            _moment_kernel(phi, mean_eff, cov_eff)
            for i in range(n):
                if not cov_eff[i, i] > 1e-30:
                    return means, covs, t, i
        else:
            mean_eff[:] = mean_main
            cov_eff[:, :] = cov_main
        for i in range(n):
            prev[i] = cov_main[i, i] if pseudo_from_main else cov_eff[i, i]
        if t >= transient:
            means[t - transient] = mean_eff
            covs[t - transient] = cov_eff
    return means, covs, -1, -1


def effective_moments(config):
    """Per-step sampling mean and covariance for the kept (post-transient) steps.

    Returns ``(means, covs)`` with shapes ``(n_steps, N)`` and ``(n_steps, N, N)``.
    """
    init_rng, main_rng, pseudo_rng, _ = _streams(config.seed)
    phi0 = initial_phi(config, init_rng)
    total = config.transient + config.n_steps
    n, m, r = config.n_assets, config.n_main, config.n_random
    eps = main_rng.standard_normal((total, n, m))
    z_pseudo = pseudo_rng.standard_normal((total, n, r))
    means, covs, bad_step, bad_asset = _run_recurrence(
        np.ascontiguousarray(phi0.main),
        float(config.alpha),
        float(config.sigma_eps),
        eps,
        z_pseudo,
        config.transient,
        config.moments == ALL_COLUMNS,
        config.pseudo_variance == "main",
    )
    if bad_step >= 0:
        raise DegenerateVariance(f"variance of asset {bad_asset} collapsed", bad_step)
    return means, covs


def simulate(config, chunk=4096):
    """Run the model and return the post-transient :class:`ReturnPanel`.

    Each step: evolve main vectors, compute main-only moments, redraw pseudo
    vectors from the previous effective variance diagonal (if ``n_random > 0``),
    form the effective moments, draw returns.  Deterministic given ``config.seed``.
    """
    means, covs = effective_moments(config)
    ret_rng = _streams(config.seed)[3]
    total = config.transient + config.n_steps
    z = ret_rng.standard_normal((total, config.n_assets))[config.transient :]
    returns = np.empty_like(means)
    for start in range(0, config.n_steps, chunk):
        stop = min(start + chunk, config.n_steps)
        factor = _repaired_factor(covs[start:stop], step=config.transient + start)
        returns[start:stop] = means[start:stop] + np.einsum("tij,tj->ti", factor, z[start:stop])
    return ReturnPanel.from_returns(returns, config)


def simulate_stepwise(config):
    """Reference loop built from the public per-step operations (slow).

    Consumes the same random streams as :func:`simulate`; used to cross-check it.
    """
    init_rng, main_rng, pseudo_rng, ret_rng = _streams(config.seed)
    phi = initial_phi(config, init_rng)
    prev = np.diag(compute_moments(phi, MAIN_ONLY).covariance).copy()
    total = config.transient + config.n_steps
    out = np.empty((config.n_steps, config.n_assets))
    for t in range(total):
        phi = evolve_main_vectors(phi, config.alpha, config.sigma_eps, main_rng)
        main_moments = compute_moments(phi, MAIN_ONLY)
        if config.n_random > 0:
            phi = draw_random_vectors(phi, prev, pseudo_rng)
        if config.n_random > 0 and config.moments == ALL_COLUMNS:
            eff = compute_moments(phi, ALL_COLUMNS)
        else:
            eff = main_moments
        src = main_moments if config.pseudo_variance == "main" else eff
        prev = np.diag(src.covariance).copy()
        r = sample_returns(eff.mean, eff.covariance, ret_rng)
        if t >= config.transient:
            out[t - config.transient] = r
    return ReturnPanel.from_returns(out, config)

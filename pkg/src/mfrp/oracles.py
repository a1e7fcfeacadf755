"""Synthetic signals with analytically known scaling, for validating the analysis stack."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class FbmSpec:
    hurst: float
    length: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.hurst < 1.0:
            raise ConfigError(f"hurst must lie strictly inside (0, 1), got {self.hurst}")
        if self.length < 2:
            raise ConfigError("length must be >= 2")


@dataclass(frozen=True)
class CascadeSpec:
    p: float
    depth: int
    seed: int = 0

    def __post_init__(self):
        if not 0.5 < self.p < 1.0:
            raise ConfigError(f"p must lie in (0.5, 1), got {self.p}")
        if self.depth < 1:
            raise ConfigError("depth must be positive")


def fgn_autocovariance(hurst, k):
    """Autocovariance of unit-variance fractional Gaussian noise at lag ``k``."""
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


def generate_fgn(hurst, length, rng):
    """Exact fractional Gaussian noise by circulant embedding (Davies-Harte)."""
    n = int(length)
    gamma = fgn_autocovariance(hurst, np.arange(n + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        raise RuntimeError("circulant embedding is not non-negative definite")
    lam = np.clip(lam, 0.0, None)
    m = row.shape[0]
    w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    x = np.fft.fft(np.sqrt(lam / m) * w)
    return x.real[:n]


def generate_fbm(spec):
    """Discrete fBm path ``Y(t) = sum_{s<=t} fGn(s)`` of ``spec.length`` samples."""
    rng = np.random.default_rng(spec.seed)
    return np.cumsum(generate_fgn(spec.hurst, spec.length, rng))


def generate_cascade(spec):
    """Binomial multiplicative cascade on ``2**depth`` cells with total mass 1.

    Every node hands weight ``p`` to one child and ``1 - p`` to the other; which
    child gets ``p`` is a fair coin flip per node.
    """
    rng = np.random.default_rng(spec.seed)
    mass = np.ones(1)
    for _ in range(spec.depth):
        flip = rng.random(mass.shape[0]) < 0.5
        w = np.where(flip, spec.p, 1.0 - spec.p)
        left = mass * w
        right = mass - left
        mass = np.column_stack([left, right]).ravel()
    return mass


def cascade_tau(p, q):
    """Mass exponent of the binomial cascade, ``-log2(p**q + (1-p)**q)``."""
    q = np.asarray(q, dtype=float)
    return -np.log2(p**q + (1.0 - p) ** q)


def cascade_spectrum(p, q):
    """Analytic ``(h(q), D(q))`` of the binomial cascade via the Legendre transform."""
    q = np.asarray(q, dtype=float)
    a, b = p**q, (1.0 - p) ** q
    h = -(a * np.log2(p) + b * np.log2(1.0 - p)) / (a + b)
    return h, q * h - cascade_tau(p, q)


def cascade_h_range(p):
    """Limits of the Hoelder exponents, ``(-log2 p, -log2(1-p))``."""
    return -np.log2(p), -np.log2(1.0 - p)

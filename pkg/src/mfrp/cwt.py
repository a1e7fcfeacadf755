"""Continuous wavelet transform with derivative-of-Gaussian wavelets.

Coefficients follow the literal discrete sum

    T(tau, b) = (1/tau) * sum_t Y(t) psi((t - b) / tau)

with the wavelet truncated at ``|x| <= 8``.  Positions closer than ``8 * tau``
to either end are flagged in ``border_mask`` (cone of influence) and must be
ignored downstream.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import ConfigError, ScaleTooLarge

SUPPORT = 8.0
VOICES = 8
MIN_SCALE = 4.0


@dataclass(frozen=True)
class DogWavelet:
    order: int = 4

    def __post_init__(self):
        if self.order < 1:
            raise ConfigError("DOG order must be >= 1")

    def __call__(self, x):
        return dog_evaluate(self.order, x)


def dog_evaluate(order, x):
    """n-th derivative of ``exp(-x**2 / 2)``: ``(-1)**n He_n(x) exp(-x**2/2)``.

    ``He_n`` is the probabilists' Hermite polynomial, built by the recursion
    ``He_{k+1} = x He_k - k He_{k-1}``.
    """
    if order < 1:
        raise ConfigError("DOG order must be >= 1")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x.copy()
    for k in range(1, order):
        prev, cur = cur, x * cur - k * prev
    sign = -1.0 if order % 2 else 1.0
    return sign * cur * np.exp(-0.5 * x * x)


@dataclass(frozen=True)
class CwtField:
    scales: np.ndarray
    positions: np.ndarray
    coefficients: np.ndarray
    border_mask: np.ndarray

    @property
    def modulus(self):
        return np.abs(self.coefficients)


def default_scales(length, voices=VOICES, smallest=MIN_SCALE):
    """Log-spaced scales, ``voices`` per octave, from ``smallest`` to ``length / 8``."""
    if length < 256:
        raise ConfigError(f"series length {length} < 256 is too short for the default scale grid")
    octaves = math.log2(length / 8.0 / smallest)
    n = int(math.floor(octaves * voices + 1e-9)) + 1
    return smallest * 2.0 ** (np.arange(n) / voices)


def _kernel(wavelet, scale):
    half = int(math.floor(SUPPORT * scale))
    k = np.arange(-half, half + 1)
    return k, wavelet(k / scale) / scale


@lru_cache(maxsize=256)
def _kernel_spectrum(wavelet, scale, size):
    k, w = _kernel(wavelet, scale)
    g = np.zeros(size)
    # circular kernel g[j] = w[-j]
    g[(-k) % size] = w
    spec = sfft.rfft(g)
    spec.setflags(write=False)
    return spec


def border_mask(n, scales):
    b = np.arange(n)
    half = np.floor(SUPPORT * np.asarray(scales, dtype=float)).astype(int)[:, None]
    return (b[None, :] < half) | (b[None, :] > n - 1 - half)


def transform(series, wavelet=DogWavelet(4), scales=None, method="fft"):
    """Wavelet coefficients on every integer position for each scale.

    ``method="direct"`` evaluates the sum term by term; ``"fft"`` uses one
    zero-padded circular correlation per scale and agrees with it to rounding.
    """
    y = np.asarray(series, dtype=float)
    n = y.shape[0]
    if scales is None:
        scales = default_scales(n)
    scales = np.asarray(scales, dtype=float)
    if np.any(scales < 1.0):
        raise ConfigError("scales must be >= 1 sample")
    if n < 8 * scales.max():
        raise ScaleTooLarge(f"series length {n} < 8 x largest scale {scales.max():g}")
    coef = np.empty((scales.shape[0], n))
    if method == "direct":
        for i, s in enumerate(scales):
            k, w = _kernel(wavelet, s)
            half = k[-1]
            padded = np.concatenate([np.zeros(half), y, np.zeros(half)])
            # correlate: out[b] = sum_k y[b + k] w[k]
            coef[i] = np.correlate(padded, w, mode="valid")
    elif method == "fft":
        max_half = int(math.floor(SUPPORT * scales.max()))
        size = sfft.next_fast_len(n + max_half + 1, real=True)
        yf = sfft.rfft(y, size)
        for i, s in enumerate(scales):
            coef[i] = sfft.irfft(yf * _kernel_spectrum(wavelet, float(s), size), size)[:n]
    else:
        raise ConfigError(f"unknown transform method {method!r}")
    return CwtField(scales, np.arange(n), coef, border_mask(n, scales))

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.polynomial import hermite_e

from mfrp.cwt import DogWavelet, border_mask, default_scales, dog_evaluate, transform
from mfrp.errors import ConfigError, ScaleTooLarge
from mfrp.oracles import FbmSpec, generate_fbm


def naive_cwt(y, wavelet, scale, b):
    """Literal (1/tau) sum_t Y(t) psi((t - b) / tau) over the truncated support."""
    total = 0.0
    for t in range(y.shape[0]):
        x = (t - b) / scale
        if abs(x) <= 8.0:
            total += y[t] * float(wavelet(np.array(x)))
    return total / scale


def test_dog_values_at_origin():
    assert dog_evaluate(2, 0.0) == -1.0
    assert dog_evaluate(4, 0.0) == 3.0
    assert dog_evaluate(1, 0.0) == 0.0


@given(st.integers(1, 8), st.floats(-6, 6))
def test_dog_matches_hermite_e(order, x):
    coef = np.zeros(order + 1)
    coef[order] = 1.0
    expected = (-1) ** order * hermite_e.hermeval(x, coef) * math.exp(-0.5 * x * x)
    assert dog_evaluate(order, x) == pytest.approx(expected, rel=1e-12, abs=1e-14)


def test_dog_is_gaussian_derivative():
    x = np.linspace(-4, 4, 2001)
    g = np.exp(-0.5 * x * x)
    d1 = np.gradient(g, x)
    np.testing.assert_allclose(dog_evaluate(1, x)[5:-5], d1[5:-5], atol=1e-5)


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5])
def test_vanishing_moments(order):
    x = np.linspace(-20, 20, 400001)
    dx = x[1] - x[0]
    psi = dog_evaluate(order, x)
    for k in range(order):
        assert abs(np.sum(x**k * psi) * dx) < 1e-8
    assert abs(np.sum(x**order * psi) * dx) > 0.1


def test_dog_order_validation():
    with pytest.raises(ConfigError):
        DogWavelet(0)
    with pytest.raises(ConfigError):
        dog_evaluate(0, 1.0)


def test_default_scales_examples():
    s = default_scales(32768)
    assert s.shape == (81,)
    assert s[0] == 4.0 and s[-1] == pytest.approx(4096.0)
    assert np.allclose(np.diff(np.log2(s)), 1 / 8)
    s = default_scales(256)
    assert s.shape == (25,)
    assert s[-1] == pytest.approx(32.0)
    with pytest.raises(ConfigError):
        default_scales(255)


def test_border_mask_width():
    mask = border_mask(100, [1.0, 2.5])
    assert mask[0].sum() == 16 and mask[0, 7] and not mask[0, 8] and mask[0, 92] and not mask[0, 91]
    assert mask[1, :20].all() and not mask[1, 20]


def test_scale_too_large():
    with pytest.raises(ScaleTooLarge):
        transform(np.zeros(300), scales=[40.0])
    with pytest.raises(ConfigError):
        transform(np.zeros(300), scales=[0.5])
    with pytest.raises(ConfigError):
        transform(np.zeros(300), scales=[4.0], method="bogus")


def test_impulse_response():
    y = np.zeros(512)
    y[200] = 1.0
    w = DogWavelet(4)
    field = transform(y, w, scales=[4.0, 11.3])
    for i, s in enumerate(field.scales):
        for b in (170, 195, 200, 231):
            expected = w(np.array((200 - b) / s)) / s if abs(200 - b) / s <= 8 else 0.0
            assert field.coefficients[i, b] == pytest.approx(float(expected), abs=1e-15)


@given(arrays(float, st.integers(260, 330), elements=st.floats(-10, 10)), st.integers(1, 5))
def test_fft_matches_direct(y, order):
    scales = [4.0, 6.7, 9.0]
    w = DogWavelet(order)
    a = transform(y, w, scales, method="fft").coefficients
    b = transform(y, w, scales, method="direct").coefficients
    np.testing.assert_allclose(a, b, atol=1e-12 * max(1.0, np.abs(y).max()))


def test_matches_naive_sum(rng):
    y = rng.standard_normal(300)
    w = DogWavelet(3)
    field = transform(y, w, [5.0])
    for b in (0, 41, 150, 299):
        assert field.coefficients[0, b] == pytest.approx(naive_cwt(y, w, 5.0, b), abs=1e-12)


@given(arrays(float, 256, elements=st.floats(-5, 5)), arrays(float, 256, elements=st.floats(-5, 5)), st.floats(-3, 3))
def test_transform_is_linear(x, y, c):
    tx = transform(x, scales=[4.0, 8.0]).coefficients
    ty = transform(y, scales=[4.0, 8.0]).coefficients
    txy = transform(x + c * y, scales=[4.0, 8.0]).coefficients
    np.testing.assert_allclose(txy, tx + c * ty, atol=1e-9)


def test_cubic_trend_annihilated():
    t = np.arange(4096, dtype=float)
    y = 3e-9 * (t - 1000.0) ** 3 - 2e-4 * t**2 + 0.5 * t + 7.0
    field = transform(y, DogWavelet(4))
    inside = ~field.border_mask
    assert np.abs(field.coefficients[inside]).max() <= 1e-8 * np.abs(y).max()


def test_low_order_sees_the_trend():
    t = np.arange(4096, dtype=float)
    y = 1e-9 * t**3
    field = transform(y, DogWavelet(1))
    assert np.abs(field.coefficients[~field.border_mask]).max() > 1e-3


def test_fbm_coefficient_rms_scaling():
    # with the 1/tau normalisation the RMS grows as tau**H
    for hurst in (0.3, 0.7):
        y = generate_fbm(FbmSpec(hurst, 2**15, 1))
        field = transform(y)
        sel = range(8, 64)
        rms = [np.sqrt(np.mean(field.coefficients[i][~field.border_mask[i]] ** 2)) for i in sel]
        slope = np.polyfit(np.log(field.scales[sel.start : sel.stop]), np.log(rms), 1)[0]
        assert slope == pytest.approx(hurst, abs=0.1)


def test_field_shapes():
    field = transform(np.random.default_rng(0).standard_normal(1024))
    assert field.coefficients.shape == (field.scales.shape[0], 1024)
    assert field.border_mask.shape == field.coefficients.shape
    np.testing.assert_array_equal(field.positions, np.arange(1024))
    np.testing.assert_array_equal(field.modulus, np.abs(field.coefficients))

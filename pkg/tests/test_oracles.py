import numpy as np
import pytest
from hypothesis import given, strategies as st

from mfrp.errors import ConfigError
from mfrp.oracles import (
    CascadeSpec,
    FbmSpec,
    cascade_h_range,
    cascade_spectrum,
    cascade_tau,
    fgn_autocovariance,
    generate_cascade,
    generate_fbm,
)


def lag_autocorr(x, k):
    x = x - x.mean()
    return float(np.dot(x[:-k], x[k:]) / np.dot(x, x))


@pytest.mark.parametrize("hurst,expected", [(0.5, 0.0), (0.7, 0.31951), (0.3, -0.24214)])
def test_fgn_lag1_examples(hurst, expected):
    assert fgn_autocovariance(hurst, 1) == pytest.approx(expected, abs=1e-4)
    inc = np.diff(generate_fbm(FbmSpec(hurst, 10**6, 3)))
    tol = 0.01 if hurst == 0.5 else 0.02
    assert lag_autocorr(inc, 1) == pytest.approx(expected, abs=tol)


@pytest.mark.parametrize("hurst", [0.3, 0.7])
def test_fgn_autocovariance_lags_1_to_10(hurst):
    inc = np.diff(generate_fbm(FbmSpec(hurst, 10**6, 8)))
    emp = np.array([lag_autocorr(inc, k) for k in range(1, 11)])
    np.testing.assert_allclose(emp, fgn_autocovariance(hurst, np.arange(1, 11)), atol=0.02)


@pytest.mark.parametrize("hurst", [0.3, 0.5, 0.7])
def test_fbm_self_similarity(hurst):
    y = generate_fbm(FbmSpec(hurst, 2**15, 0))
    lags = np.unique(np.geomspace(1, 256, 12).astype(int))
    v = [np.var(y[k:] - y[:-k]) for k in lags]
    slope = np.polyfit(np.log(lags), np.log(v), 1)[0]
    assert slope == pytest.approx(2 * hurst, abs=0.05)


def test_fbm_deterministic():
    a = generate_fbm(FbmSpec(0.6, 1000, 4))
    np.testing.assert_array_equal(a, generate_fbm(FbmSpec(0.6, 1000, 4)))
    assert not np.array_equal(a, generate_fbm(FbmSpec(0.6, 1000, 5)))
    assert a.shape == (1000,)


@pytest.mark.parametrize("hurst", [0.0, 1.0, -0.2])
def test_fbm_spec_rejects_bad_hurst(hurst):
    with pytest.raises(ConfigError):
        FbmSpec(hurst, 100)


def test_cascade_one_split():
    cells = generate_cascade(CascadeSpec(0.7, 1, 0))
    assert sorted(cells.tolist()) == pytest.approx([0.3, 0.7])
    orders = {tuple(np.round(generate_cascade(CascadeSpec(0.7, 1, s)), 6)) for s in range(20)}
    assert len(orders) == 2


@given(st.floats(0.51, 0.99), st.integers(1, 14), st.integers(0, 2**32))
def test_cascade_mass_conserved(p, depth, seed):
    cells = generate_cascade(CascadeSpec(p, depth, seed))
    assert cells.shape == (2**depth,)
    assert np.all(cells > 0)
    assert abs(cells.sum() - 1.0) < 1e-12


def test_cascade_deterministic():
    a = generate_cascade(CascadeSpec(0.7, 10, 1))
    np.testing.assert_array_equal(a, generate_cascade(CascadeSpec(0.7, 10, 1)))


@pytest.mark.parametrize("kwargs", [dict(p=0.5, depth=3), dict(p=1.0, depth=3), dict(p=0.7, depth=0)])
def test_cascade_spec_validation(kwargs):
    with pytest.raises(ConfigError):
        CascadeSpec(**kwargs)


def test_cascade_analytics():
    lo, hi = cascade_h_range(0.7)
    assert lo == pytest.approx(0.5146, abs=1e-4)
    assert hi == pytest.approx(1.7370, abs=1e-4)
    assert hi - lo == pytest.approx(np.log2(0.7 / 0.3), abs=1e-12)
    assert cascade_tau(0.7, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert cascade_tau(0.7, 0.0) == pytest.approx(-1.0, abs=1e-15)
    h0, d0 = cascade_spectrum(0.7, 0.0)
    assert d0 == pytest.approx(1.0, abs=1e-12)
    # h(q) is decreasing and bounded by the range endpoints
    h, d = cascade_spectrum(0.7, np.linspace(-20, 20, 81))
    assert np.all(np.diff(h) < 0)
    assert h.min() > lo and h.max() < hi
    assert np.all(d <= 1.0 + 1e-12)


def test_cascade_moment_sums_match_tau():
    cells = generate_cascade(CascadeSpec(0.7, 12, 0))
    for q in (-2.0, 0.5, 2.0, 3.0):
        # the exponent of sum(mu_i**q) in the cell size 2**-n is tau(q) exactly
        assert -np.log2(np.sum(cells**q)) / 12 == pytest.approx(cascade_tau(0.7, q), rel=1e-9)

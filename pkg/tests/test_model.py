import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mfrp.errors import ConfigError, DegenerateVariance, FactorizationFailure, NonPositiveVariance
from mfrp.model import (
    ALL_COLUMNS,
    MAIN_ONLY,
    ModelConfig,
    PhiMatrix,
    ReturnPanel,
    _repaired_factor,
    compute_moments,
    derive_sigma_eps,
    draw_random_vectors,
    evolve_main_vectors,
    main_vector_path,
    sample_returns,
    simulate,
    simulate_stepwise,
)
from mfrp.stats import excess_kurtosis

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def naive_moments(phi, k_cols):
    """Two-pass loop version of the moment formulas, for cross-checking."""
    n = phi.shape[0]
    cols = phi[:, :k_cols]
    mean = [sum(cols[i, j] for j in range(k_cols)) / k_cols for i in range(n)]
    cov = np.empty((n, n))
    for i in range(n):
        for l in range(n):
            cov[i, l] = sum((cols[i, j] - mean[i]) * (cols[l, j] - mean[l]) for j in range(k_cols)) / k_cols
    return np.array(mean), cov


# -- derive_sigma_eps ----------------------------------------------------------


def test_sigma_eps_examples():
    assert derive_sigma_eps(0.0, 3.7) == 0.0
    assert derive_sigma_eps(1.0, 1.0) == 1.0
    assert derive_sigma_eps(0.01, 1.0) == pytest.approx(0.141067, abs=1e-6)


@given(st.floats(1e-6, 1.0), st.floats(1e-3, 100.0))
def test_sigma_eps_fixed_point(alpha, target):
    s = derive_sigma_eps(alpha, target)
    assert s * s / (2 * alpha - alpha * alpha) == pytest.approx(target, rel=1e-12)


@pytest.mark.parametrize("alpha,target", [(-0.1, 1.0), (1.1, 1.0), (0.5, 0.0), (0.5, -1.0)])
def test_sigma_eps_rejects_bad_input(alpha, target):
    with pytest.raises(ConfigError):
        derive_sigma_eps(alpha, target)


def test_variance_fixed_point_by_simulation():
    rng = np.random.default_rng(1)
    alpha = 0.1
    path = main_vector_path(rng.standard_normal((2, 5)), alpha, derive_sigma_eps(alpha), 10**6 // 10, rng)
    assert 0.95 <= path.var() <= 1.05


# -- config --------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_main=1),
        dict(n_random=-1),
        dict(alpha=1.5),
        dict(sigma_eps=-1.0),
        dict(seed=-1),
        dict(seed=2**64),
        dict(moments="bogus"),
        dict(pseudo_variance="bogus"),
        dict(n_steps=0),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        ModelConfig(**kwargs)


def test_variance_locked_config():
    cfg = ModelConfig.variance_locked(0.01, n_random=2)
    assert cfg.sigma_eps == derive_sigma_eps(0.01)
    assert cfg.n_columns == 7


# -- per-step operations -------------------------------------------------------


def test_evolve_frozen_and_pseudo_untouched(rng):
    phi = PhiMatrix(rng.standard_normal((4, 6)), 3)
    out = evolve_main_vectors(phi, 0.0, 0.0, rng)
    np.testing.assert_array_equal(out.values, phi.values)
    out = evolve_main_vectors(phi, 0.3, 1.0, rng)
    np.testing.assert_array_equal(out.pseudo, phi.pseudo)


def test_evolve_alpha_one_is_memoryless():
    rng = np.random.default_rng(2)
    path = main_vector_path(np.ones((1, 1)), 1.0, 1.0, 10**5, rng)[:, 0, 0]
    assert abs(np.corrcoef(path[1:], path[:-1])[0, 1]) < 0.01


def test_main_vector_path_matches_stepwise(rng):
    main0 = rng.standard_normal((3, 4))
    a, b = np.random.default_rng(5), np.random.default_rng(5)
    path = main_vector_path(main0, 0.2, 0.5, 50, a)
    phi = PhiMatrix(main0, 4)
    for t in range(50):
        phi = evolve_main_vectors(phi, 0.2, 0.5, b)
        np.testing.assert_allclose(path[t], phi.main, rtol=0, atol=1e-14)


def test_draw_random_vectors_noop_and_errors(rng):
    phi = PhiMatrix(rng.standard_normal((3, 4)), 4)
    assert draw_random_vectors(phi, np.ones(3), rng) is phi
    phi = PhiMatrix(rng.standard_normal((3, 6)), 4)
    with pytest.raises(NonPositiveVariance):
        draw_random_vectors(phi, np.array([1.0, 0.0, 1.0]), rng)


def test_draw_random_vectors_variance():
    rng = np.random.default_rng(3)
    phi = PhiMatrix(np.zeros((3, 2 + 10**5)), 2)
    out = draw_random_vectors(phi, np.array([1.0, 4.0, 1.0]), rng).pseudo
    assert out.var(axis=1)[[0, 2]] == pytest.approx([1.0, 1.0], rel=0.02)
    assert out[1].std() == pytest.approx(2.0, rel=0.02)
    np.testing.assert_array_equal(draw_random_vectors(phi, np.ones(3), rng).main, phi.main)


def test_compute_moments_hand_example():
    m = compute_moments(PhiMatrix(np.array([[1.0, -1.0]]), 2), MAIN_ONLY)
    assert m.mean[0] == 0.0
    assert m.covariance[0, 0] == 1.0


@given(arrays(float, (5, 4), elements=finite))
def test_compute_moments_matches_naive(values):
    phi = PhiMatrix(values, 4)
    mean, cov = naive_moments(values, 4)
    if np.any(np.diag(cov) <= 1e-30):
        with pytest.raises(DegenerateVariance):
            compute_moments(phi, MAIN_ONLY)
        return
    m = compute_moments(phi, MAIN_ONLY)
    np.testing.assert_allclose(m.mean, mean, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(m.covariance, cov, rtol=1e-12, atol=1e-12 * np.abs(cov).max())


@given(arrays(float, (4, 7), elements=finite))
def test_moment_invariants(values):
    mean, cov = naive_moments(values, 7)
    if np.any(np.diag(cov) <= 1e-6):
        return
    for norm, k in ((MAIN_ONLY, 3), (ALL_COLUMNS, 7)):
        if norm == MAIN_ONLY and np.any(np.diag(naive_moments(values, 3)[1]) <= 1e-6):
            continue
        m = compute_moments(PhiMatrix(values, 3), norm)
        np.testing.assert_array_equal(m.covariance, m.covariance.T)
        assert np.linalg.eigvalsh(m.covariance).min() >= -1e-9 * np.abs(m.covariance).max()
        np.testing.assert_array_equal(np.diag(m.correlation), 1.0)
        assert np.all(np.abs(m.correlation) <= 1.0)


def test_all_columns_normalisation(rng):
    values = rng.standard_normal((3, 6))
    m = compute_moments(PhiMatrix(values, 4), ALL_COLUMNS)
    mean, cov = naive_moments(values, 6)
    np.testing.assert_allclose(m.covariance, cov, atol=1e-13)


def test_degenerate_variance():
    with pytest.raises(DegenerateVariance):
        compute_moments(PhiMatrix(np.array([[1.0, 1.0], [0.0, 1.0]]), 2))


def test_sample_returns_identity():
    rng = np.random.default_rng(4)
    draws = np.array([sample_returns(np.zeros(2), np.eye(2), rng) for _ in range(10**5)])
    assert np.all(np.abs(draws.mean(axis=0)) < 0.02)
    assert draws.var(axis=0) == pytest.approx([1.0, 1.0], rel=0.03)


def test_sample_returns_correlation():
    rng = np.random.default_rng(5)
    cov = np.array([[1.0, 0.8], [0.8, 1.0]])
    draws = np.array([sample_returns(np.zeros(2), cov, rng) for _ in range(10**5)])
    assert np.corrcoef(draws.T)[0, 1] == pytest.approx(0.8, abs=0.02)


def test_sample_returns_zero_covariance(rng):
    c = np.array([1.5, -2.0])
    np.testing.assert_allclose(sample_returns(c, np.zeros((2, 2)), rng), c, atol=1e-12)


def test_rank_deficient_factor_reproduces_covariance(rng):
    a = rng.standard_normal((6, 2))
    cov = a @ a.T
    f = _repaired_factor(cov)
    np.testing.assert_allclose(f @ f.T, cov, atol=1e-10)


def test_indefinite_covariance_rejected():
    with pytest.raises(FactorizationFailure):
        _repaired_factor(np.array([[1.0, 0.0], [0.0, -0.5]]))


# -- simulate ------------------------------------------------------------------


def test_simulate_matches_stepwise_reference():
    cfg = ModelConfig.variance_locked(0.05, n_assets=3, n_main=4, n_random=2, n_steps=300, transient=50, seed=9)
    fast, slow = simulate(cfg), simulate_stepwise(cfg)
    np.testing.assert_allclose(fast.returns, slow.returns, rtol=0, atol=1e-10)


@pytest.mark.parametrize("moments", [MAIN_ONLY, ALL_COLUMNS])
@pytest.mark.parametrize("pseudo", ["effective", "main"])
def test_simulate_modes_match_stepwise(moments, pseudo):
    cfg = ModelConfig.variance_locked(
        0.2, n_assets=3, n_main=4, n_random=1, n_steps=100, transient=10, seed=3, moments=moments, pseudo_variance=pseudo
    )
    np.testing.assert_allclose(simulate(cfg).returns, simulate_stepwise(cfg).returns, atol=1e-10)


def test_simulate_deterministic():
    cfg = ModelConfig.variance_locked(0.01, n_random=2, n_steps=2000, transient=100, seed=77)
    a, b = simulate(cfg), simulate(cfg)
    np.testing.assert_array_equal(a.returns, b.returns)
    c = simulate(cfg.replace(seed=78))
    assert not np.array_equal(a.returns, c.returns)


def test_simulate_shapes_and_prices():
    cfg = ModelConfig(n_assets=4, n_steps=500, transient=20)
    panel = simulate(cfg)
    assert panel.returns.shape == (500, 4)
    np.testing.assert_allclose(panel.prices, np.cumsum(panel.returns, axis=0))


def test_gaussian_null_kurtosis():
    panel = simulate(ModelConfig(seed=11))
    k = excess_kurtosis(panel.returns)
    assert np.all(np.abs(k) < 0.15)


def test_fat_tails_at_intermediate_alpha():
    panel = simulate(ModelConfig.variance_locked(0.01, n_random=2, seed=4))
    assert excess_kurtosis(panel.returns).mean() > 0


def memoryless_kurtosis(m):
    """Excess kurtosis of a return when the M main columns are fresh N(0,1) each step.

    Conditionally r ~ N(mu, s2) with mu ~ N(0, 1/M) and M s2 ~ chi2(M-1); the
    mixture's fourth moment works out to 3 + 6 (M-1) / M**2.
    """
    return 6.0 * (m - 1) / m**2


@pytest.mark.parametrize("m,expected", [(5, 0.96), (50, 0.1176)])
def test_memoryless_kurtosis_closed_form(m, expected):
    assert memoryless_kurtosis(m) == pytest.approx(expected, abs=1e-4)
    panel = simulate(ModelConfig.variance_locked(1.0, n_main=m, n_steps=2**16, transient=10, seed=m))
    assert excess_kurtosis(panel.returns).mean() == pytest.approx(expected, abs=0.1)


def test_csv_round_trip(tmp_path):
    cfg = ModelConfig.variance_locked(0.01, n_assets=3, n_random=1, n_steps=64, transient=8, seed=2**63 + 5)
    panel = simulate(cfg)
    path = panel.to_csv(tmp_path / "r.csv")
    back = ReturnPanel.from_csv(path)
    np.testing.assert_array_equal(back.returns, panel.returns)
    assert back.config == cfg


def test_csv_without_sidecar(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("t,asset_0\n0,1.0\n1,2.0\n2,-1.0\n")
    panel = ReturnPanel.from_csv(p)
    np.testing.assert_array_equal(panel.prices[:, 0], [1.0, 3.0, 2.0])
    assert math.isclose(panel.config.n_steps, 3)

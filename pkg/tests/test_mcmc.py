import numpy as np
import pytest
from scipy import stats

from trimap.mcmc import (
    AdaptConfig,
    adaptive_metropolis,
    batch_moment_errors,
    effective_sample_size,
    moments,
    preconditioned_sample,
)
from trimap.maps import linear_map
from trimap.targets import BananaTarget, GaussianTarget


def std_normal(x):
    return -0.5 * float(x @ x)


def test_standard_normal_moments():
    res = adaptive_metropolis(std_normal, np.zeros(2), 60_000, burn_in=5000, seed=1)
    m, v, _, _ = moments(res.chain)
    se = batch_moment_errors(res.chain)
    assert np.all(np.abs(m) < 5 * se[0])
    assert np.all(np.abs(v - 1) < 5 * se[1])
    assert 0.1 < res.acceptance_rate < 0.6


def test_stationary_histogram():
    # fixed proposal: no adaptation, so detailed balance holds exactly
    adapt = AdaptConfig(initial_cov=[[2.0]], start=10**9)
    res = adaptive_metropolis(std_normal, np.zeros(1), 200_000, burn_in=1000, seed=2, adapt=adapt)
    x = res.chain[::10, 0]
    edges = np.linspace(-3, 3, 13)
    counts, _ = np.histogram(x, edges)
    expect = len(x) * np.diff(stats.norm.cdf(edges))
    chi2 = np.sum((counts - expect) ** 2 / expect)
    assert chi2 < stats.chi2.ppf(0.999, len(counts) - 1) * 2


def test_target_acceptance_is_tracked():
    adapt = AdaptConfig(target_acceptance=0.26)
    res = adaptive_metropolis(std_normal, np.zeros(3), 40_000, burn_in=10_000, seed=3, adapt=adapt)
    assert res.acceptance_rate == pytest.approx(0.26, abs=0.04)


def test_seed_determinism():
    a = adaptive_metropolis(std_normal, np.zeros(2), 3000, seed=4)
    b = adaptive_metropolis(std_normal, np.zeros(2), 3000, seed=4)
    np.testing.assert_array_equal(a.chain, b.chain)


def test_ess_of_iid_and_correlated_chains():
    rng = np.random.default_rng(5)
    iid = rng.normal(size=(20_000, 1))
    assert effective_sample_size(iid)[0] == pytest.approx(20_000, rel=0.15)
    phi = 0.9
    ar = np.empty(20_000)
    ar[0] = 0.0
    e = rng.normal(size=20_000)
    for i in range(1, ar.size):
        ar[i] = phi * ar[i - 1] + e[i]
    expect = 20_000 * (1 - phi) / (1 + phi)
    assert effective_sample_size(ar[:, None])[0] == pytest.approx(expect, rel=0.3)


def test_exact_map_preconditioning_raises_acceptance():
    cov = np.array([[1.0, 0.95], [0.95, 1.0]]) * 4.0
    target = GaussianTarget(np.array([1.0, -1.0]), cov)
    T = linear_map(np.linalg.cholesky(cov), [1.0, -1.0])
    # the same fixed unit-covariance proposal for both chains
    adapt = AdaptConfig(initial_cov=np.eye(2), start=10**9)
    out = preconditioned_sample(T, target, 20_000, seed=6, burn_in=2000, adapt=adapt)
    plain = adaptive_metropolis(lambda y: float(target.logpdf(y)), np.zeros(2), 20_000,
                                burn_in=2000, seed=6, adapt=adapt)
    res = out.meta["mcmc"]
    assert res.acceptance_rate > 0.4
    assert res.acceptance_rate > plain.acceptance_rate
    assert np.allclose(out.points.mean(0), [1.0, -1.0], atol=0.15)


def test_identity_preconditioning_samples_target():
    target = BananaTarget()
    out = preconditioned_sample(linear_map(np.eye(2)), target, 50_000, seed=7, burn_in=5000)
    se = batch_moment_errors(out.points)
    m = out.points.mean(0)
    assert abs(m[0]) < 5 * se[0, 0]

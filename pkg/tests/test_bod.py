import numpy as np
import pytest
from scipy import stats

from trimap.bod import (
    D_STAR,
    forward,
    joint_sample,
    posterior_gradient,
    posterior_logdensity,
    prior_transform,
)


def posterior_grid_moments(n=801):
    """Posterior moments by brute-force quadrature on a fine grid."""
    t1 = np.linspace(-4, 6, n)
    t2 = np.linspace(-4, 5, n)
    g = np.stack(np.meshgrid(t1, t2, indexing="ij"), axis=-1)
    lp = posterior_logdensity(g)
    w = np.exp(lp - lp.max())
    w /= w.sum()
    out = []
    for j in range(2):
        x = g[..., j]
        m = np.sum(w * x)
        v = np.sum(w * (x - m) ** 2)
        out.append([m, v, np.sum(w * (x - m) ** 3) / v**1.5, np.sum(w * (x - m) ** 4) / v**2])
    return np.array(out).T


def test_prior_transform_examples():
    A, B = prior_transform(np.array([0.0, 0.0]))
    assert (A, B) == pytest.approx((0.8, 0.16), abs=1e-15)
    A, B = prior_transform(np.array([1.0, -1.0]))
    assert A == pytest.approx(0.4 + 0.8 * stats.norm.cdf(1.0), abs=1e-12)
    assert A == pytest.approx(1.0731, abs=1e-4)
    assert B == pytest.approx(0.01 + 0.3 * stats.norm.cdf(-1.0), abs=1e-12)


def test_forward_value():
    assert forward(np.zeros(2))[0] == pytest.approx(0.8 * (1 - np.exp(-0.16)), abs=1e-12)
    assert forward(np.zeros(2))[0] == pytest.approx(0.11827, abs=2e-5)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    for th in rng.normal(size=(5, 2)):
        g = posterior_gradient(th)
        h = 1e-6
        fd = [(posterior_logdensity(th + h * e) - posterior_logdensity(th - h * e)) / (2 * h)
              for e in np.eye(2)]
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-4)


def test_prior_pushforward_is_uniform():
    s = joint_sample(200_000, 1)
    A, B = prior_transform(s.points[:, 5:])
    assert stats.kstest((A - 0.4) / 0.8, "uniform").statistic < 0.005
    assert stats.kstest((B - 0.01) / 0.3, "uniform").statistic < 0.005


def test_joint_sample_layout_and_noise():
    s = joint_sample(50_000, 2)
    assert s.points.shape == (50_000, 7)
    assert s.meta["columns"].split() == ["d1", "d2", "d3", "d4", "d5", "theta1", "theta2"]
    resid = s.points[:, :5] - forward(s.points[:, 5:])
    assert resid.var() == pytest.approx(1e-3, rel=0.02)
    np.testing.assert_array_equal(joint_sample(10, 2).points, joint_sample(10, 2).points)


def test_posterior_is_vectorized():
    th = np.random.default_rng(3).normal(size=(4, 2))
    np.testing.assert_allclose(posterior_logdensity(th),
                               [posterior_logdensity(t) for t in th], rtol=1e-14)


def test_posterior_mass_is_resolved_by_grid():
    # the oracle itself: halving the grid spacing changes the moments negligibly
    a, b = posterior_grid_moments(401), posterior_grid_moments(801)
    np.testing.assert_allclose(a[:2], b[:2], atol=1e-4)
    assert np.isclose(D_STAR.size, 5)

import numpy as np
import pytest

from trimap.diagnostics import kl_variance_direct
from trimap.direct import (
    DirectBuildConfig,
    build_direct,
    direct_objective,
    estimate_log_normalizing_constant,
)
from trimap.errors import CallbackFailure
from trimap.maps import identity_map, linear_map, make_map
from trimap.quadrature import gauss_hermite_1d, tensorize
from trimap.targets import BananaTarget, GaussianTarget, TargetDensity


def std_normal(n):
    return GaussianTarget(np.zeros(n), np.eye(n), normalized=True)


def test_objective_at_identity_for_standard_normal():
    rule = tensorize(gauss_hermite_1d(5), 2)
    value, grad = direct_objective(identity_map(2), std_normal(2), rule)
    expected = rule.weights @ (0.5 * np.sum(rule.nodes**2, axis=1)) + np.log(2 * np.pi)
    assert value == pytest.approx(expected, rel=1e-14)
    np.testing.assert_allclose(grad, 0.0, atol=1e-13)


def test_exact_map_is_stationary():
    rule = gauss_hermite_1d(10)
    target = GaussianTarget([1.0], [[4.0]])
    v, g = direct_objective(linear_map([[2.0]], [1.0]), target, rule)
    assert np.linalg.norm(g) < 1e-10
    v2, _ = direct_objective(linear_map([[2.1]], [1.0]), target, rule)
    assert v2 > v


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    rule = tensorize(gauss_hermite_1d(6), 2)
    for kind, target in [("total", BananaTarget(0.5, 0.8)), ("monotone", BananaTarget(0.3)),
                         ("nomixed", GaussianTarget([0.3, -0.2], [[1.0, 0.4], [0.4, 2.0]]))]:
        T = make_map(2, kind, 3)
        c = T.flat_coefficients() + 0.01 * rng.normal(size=T.flat_coefficients().size)
        constraint = "monotone" if kind == "monotone" else "pointwise"
        f0, g = direct_objective(T.with_coefficients(c), target, rule, constraint)
        assert np.isfinite(f0)
        h = 1e-6
        for j in range(c.size):
            e = np.zeros_like(c)
            e[j] = h
            fp, _ = direct_objective(T.with_coefficients(c + e), target, rule, constraint)
            fm, _ = direct_objective(T.with_coefficients(c - e), target, rule, constraint)
            fd = (fp - fm) / (2 * h)
            assert abs(fd - g[j]) <= 1e-6 * max(1.0, abs(g[j]))


def test_pointwise_barrier_returns_infinity():
    rule = gauss_hermite_1d(5)
    v, _ = direct_objective(linear_map([[1e-8]]), std_normal(1), rule, "pointwise", eps=1e-6)
    assert v == np.inf


def test_barrier_grows_as_partial_shrinks():
    rule = gauss_hermite_1d(5)
    vals = [direct_objective(linear_map([[s]]), std_normal(1), rule)[0] for s in (1e-2, 1e-4, 1e-6)]
    assert vals[0] < vals[1] < vals[2]


def test_one_dimensional_gaussian():
    T, rep = build_direct(GaussianTarget([1.0], [[4.0]]), degree=1, order=10)
    np.testing.assert_allclose(T.flat_coefficients(), [1.0, 2.0], atol=1e-6)
    assert rep.kl_variance_estimate < 1e-10
    assert rep.converged and rep.monotonicity_violations == 0 and rep.n_nodes == 10


def test_correlated_gaussian_gives_cholesky_factor():
    T, rep = build_direct(GaussianTarget([0.0, 0.0], [[1.0, 0.5], [0.5, 1.0]]), degree=1)
    c = T.flat_coefficients()
    # component 1: (c0, x1); component 2: (c0, x1, x2)
    np.testing.assert_allclose(c, [0.0, 1.0, 0.0, 0.5, np.sqrt(0.75)], atol=1e-5)
    assert rep.kl_variance_estimate < 1e-10


def test_monotone_parameterization_recovers_gaussian():
    target = GaussianTarget([1.0, -1.0], [[2.0, 0.6], [0.6, 1.0]])
    T, rep = build_direct(target, kind="monotone", degree=1)
    L = np.linalg.cholesky(target.cov)
    x = tensorize(gauss_hermite_1d(4), 2).nodes
    np.testing.assert_allclose(T(x), target.mean + x @ L.T, atol=1e-6)
    assert rep.monotonicity_violations == 0


def test_monte_carlo_integration():
    cfg = DirectBuildConfig(integration="montecarlo", samples=2000, seed=3, degree=1)
    T, rep = build_direct(GaussianTarget([1.0], [[4.0]]), cfg)
    # the SAA optimum for a Gaussian target matches the sample moments
    assert rep.converged
    assert T.flat_coefficients()[1] == pytest.approx(2.0, rel=0.1)


def test_banana_improves_with_degree():
    target = BananaTarget(1.0, 1.0)
    kls = [build_direct(target, degree=p, order=12)[1].kl_variance_estimate for p in (1, 2)]
    assert kls[1] < 1e-3 * kls[0]


def test_log_normalizing_constant_examples():
    rule = gauss_hermite_1d(10)
    shifted = TargetDensity(1, lambda y: np.log(5.0) - 0.5 * y[:, 0] ** 2 - 0.5 * np.log(2 * np.pi))
    assert estimate_log_normalizing_constant(identity_map(1), shifted, rule) == \
        pytest.approx(np.log(5.0), abs=1e-12)
    assert estimate_log_normalizing_constant(identity_map(1), std_normal(1), rule) == \
        pytest.approx(0.0, abs=1e-12)
    target = GaussianTarget([1.0], [[4.0]])
    est = estimate_log_normalizing_constant(linear_map([[2.0]], [1.0]), target, rule)
    assert est == pytest.approx(target.log_normalizer, abs=1e-12)


def test_normalization_invariance():
    target = BananaTarget(0.5)
    T1, r1 = build_direct(target, degree=2)
    T7, r7 = build_direct(target.scaled(7.0), degree=2)
    np.testing.assert_allclose(T1.flat_coefficients(), T7.flat_coefficients(), atol=1e-8)
    assert r7.log_normalizing_constant - r1.log_normalizing_constant == \
        pytest.approx(np.log(7.0), abs=1e-10)


def test_convex_along_segments_for_log_concave_target():
    rule = tensorize(gauss_hermite_1d(6), 2)
    target = GaussianTarget([0.5, 0.0], [[1.0, 0.3], [0.3, 0.5]])
    T = make_map(2, "total", 2)
    rng = np.random.default_rng(5)
    c0 = T.flat_coefficients()
    for _ in range(10):
        a = c0 + 0.05 * rng.normal(size=c0.size)
        b = c0 + 0.05 * rng.normal(size=c0.size)
        fa = direct_objective(T.with_coefficients(a), target, rule)[0]
        fb = direct_objective(T.with_coefficients(b), target, rule)[0]
        fm = direct_objective(T.with_coefficients(0.5 * (a + b)), target, rule)[0]
        assert fm <= 0.5 * (fa + fb) + 1e-10


def test_failing_callback_propagates():
    bad = TargetDensity(1, lambda y: np.full(len(y), np.nan))
    with pytest.raises(CallbackFailure):
        build_direct(bad, degree=1)


def test_config_validation():
    with pytest.raises(ValueError):
        DirectBuildConfig(gtol=0.0)
    with pytest.raises(ValueError):
        build_direct(std_normal(1), integration="sparse")

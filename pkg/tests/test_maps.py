import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trimap.errors import NonMonotoneAtPoint
from trimap.maps import (
    Direction,
    IntegratedExponentialComponent,
    TriangularMap,
    identity_map,
    integrated_exponential_component,
    linear_map,
    make_map,
    polynomial_component,
    rbf_component,
)


def random_map(kind, n=3, degree=3, seed=0, scale=0.3):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(200, n))
    tmap = make_map(n, kind, degree, points=pts if kind == "rbf" else None)
    c = tmap.flat_coefficients() + scale * rng.normal(size=tmap.flat_coefficients().size)
    return tmap.with_coefficients(c)


def test_identity_map():
    x = np.array([0.3, -1.2])
    np.testing.assert_array_equal(identity_map(2)(x), x)
    assert identity_map(2).log_det_jacobian(x) == 0.0


def test_linear_map_example():
    T = linear_map([[2.0, 0.0], [1.0, 3.0]])
    np.testing.assert_allclose(T(np.array([2.0, 5.0 / 3.0])), [4.0, 7.0], rtol=1e-15)
    x = np.random.default_rng(0).normal(size=(5, 2))
    np.testing.assert_allclose(T.log_det_jacobian(x), np.log(6.0), rtol=1e-14)
    assert np.log(6.0) == pytest.approx(1.791759, abs=1e-6)


def test_linear_map_rejects_upper_entries():
    with pytest.raises(ValueError):
        linear_map([[1.0, 1.0], [0.0, 1.0]])


def test_integrated_exponential_trivial():
    c = integrated_exponential_component(1, 1, 1, 1)
    T = TriangularMap([c])
    assert T(np.array([1.5]))[0] == pytest.approx(1.5, abs=1e-14)
    assert T.log_det_jacobian(np.array([-0.7])) == pytest.approx(0.0, abs=1e-15)
    assert T(np.array([-2.0]))[0] == pytest.approx(-2.0, abs=1e-14)


def test_integrated_exponential_closed_form():
    # b(w) = beta w gives int_0^x exp(beta w) dw = (exp(beta x) - 1) / beta
    comp = IntegratedExponentialComponent(1, [[0]], [[0], [1]], [0.5, 0.0, 0.8])
    x = np.linspace(-3, 3, 13)[:, None]
    expected = 0.5 + np.expm1(0.8 * x[:, 0]) / 0.8
    np.testing.assert_allclose(comp.value(x), expected, rtol=1e-13)


def test_a_part_may_not_depend_on_last_input():
    with pytest.raises(ValueError):
        IntegratedExponentialComponent(1, [[1]], [[0]], [0.0, 0.0])


def test_coefficient_gradient_examples():
    T = TriangularMap([polynomial_component(1, 1, 2)])
    g = T.coefficient_gradient(np.array([2.0]), "value")[0]
    np.testing.assert_allclose(g, [1.0, 2.0, 3.0])
    T2 = make_map(2, "total", 2)
    g2 = T2.coefficient_gradient(np.random.default_rng(1).normal(size=(4, 2)), "value")
    np.testing.assert_array_equal(g2[1][:, 0], 1.0)


@pytest.mark.parametrize("kind", ["total", "nomixed", "diagonal", "monotone", "rbf"])
def test_coefficient_gradients_match_finite_differences(kind):
    T = random_map(kind, seed=3)
    rng = np.random.default_rng(4)
    x = rng.uniform(-2, 2, size=(100, 3))
    if kind != "monotone":
        # keep polynomial maps monotone on the test points
        x = x[np.all(T.diag_jacobian(x) > 0.05, axis=1)]
    h = 1e-6
    c0 = T.flat_coefficients()
    gv = np.hstack(T.coefficient_gradient(x, "value"))
    gl = np.hstack(T.coefficient_gradient(x, "logdiag"))
    offsets = np.cumsum([0] + list(T.sizes))
    for j in range(c0.size):
        k = int(np.searchsorted(offsets, j, side="right")) - 1
        e = np.zeros_like(c0)
        e[j] = h
        Tp, Tm = T.with_coefficients(c0 + e), T.with_coefficients(c0 - e)
        fd_v = (Tp(x)[:, k] - Tm(x)[:, k]) / (2 * h)
        fd_l = (np.log(Tp.diag_jacobian(x)[:, k]) - np.log(Tm.diag_jacobian(x)[:, k])) / (2 * h)
        scale_v = np.maximum(1.0, np.abs(gv[:, j]))
        scale_l = np.maximum(1.0, np.abs(gl[:, j]))
        assert np.max(np.abs(fd_v - gv[:, j]) / scale_v) < 1e-6
        assert np.max(np.abs(fd_l - gl[:, j]) / scale_l) < 1e-6


@pytest.mark.parametrize("kind", ["total", "monotone", "rbf"])
def test_jacobian_matches_finite_differences(kind):
    T = random_map(kind, seed=5)
    x = np.random.default_rng(6).normal(size=(10, 3))
    J = T.jacobian(x)
    h = 1e-6
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (T(x + e) - T(x - e)) / (2 * h)
        np.testing.assert_allclose(J[:, :, j], fd, rtol=1e-6, atol=1e-7)
    assert np.all(np.triu(J, 1) == 0)
    np.testing.assert_allclose(np.einsum("mii->mi", J), T.diag_jacobian(x), rtol=1e-12)


@pytest.mark.parametrize("kind", ["total", "nomixed", "monotone", "rbf"])
def test_triangularity(kind):
    T = random_map(kind, n=4, degree=2, seed=7)
    rng = np.random.default_rng(8)
    x = rng.normal(size=(50, 4))
    y = T(x)
    for j in range(4):
        xp = x.copy()
        xp[:, j] += rng.normal(size=50)
        yp = T(xp)
        np.testing.assert_array_equal(yp[:, :j], y[:, :j])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_integrated_exponential_always_increasing(seed):
    rng = np.random.default_rng(seed)
    comp = integrated_exponential_component(3, 3, 2, 2)
    comp = comp.with_coeffs(rng.uniform(-3, 3, comp.ncoef))
    x = rng.normal(scale=2.0, size=(200, 3))
    assert np.all(comp.diag(x) > 0)


def test_quadrature_order_convergence():
    rng = np.random.default_rng(9)
    comp = integrated_exponential_component(2, 2, 2, 3, quad_order=32)
    comp = comp.with_coeffs(rng.uniform(-0.5, 0.5, comp.ncoef))
    finer = IntegratedExponentialComponent(2, comp.a_indices, comp.b_indices, comp.coeffs, 64)
    x = rng.uniform(-4, 4, size=(200, 2))
    # exp(b) reaches ~1e10 here, so compare relative to max(1, |value|)
    a, b = comp.value(x), finer.value(x)
    assert np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))) < 1e-10


def test_non_monotone_point_raises():
    T = linear_map([[-1.0]])
    with pytest.raises(NonMonotoneAtPoint) as err:
        T.log_det_jacobian(np.array([0.5]))
    assert err.value.k == 1


def test_premap_is_applied():
    base = linear_map([[2.0]], [1.0])
    T = base.replace(shift=np.array([3.0]), scale=np.array([4.0]))
    # T(x) = 1 + 2 (x - 3) / 4, d/dx = 1/2
    assert T(np.array([5.0]))[0] == pytest.approx(2.0)
    assert T.log_det_jacobian(np.array([0.0])) == pytest.approx(np.log(0.5))


def test_coefficients_are_read_only():
    T = make_map(2, "total", 2)
    with pytest.raises(ValueError):
        T.components[0].coeffs[0] = 5.0


def test_flat_round_trip():
    T = random_map("monotone", seed=10)
    c = T.flat_coefficients()
    np.testing.assert_array_equal(T.with_coefficients(c).flat_coefficients(), c)
    with pytest.raises(ValueError):
        T.with_coefficients(c[:-1])


def test_head_and_direction():
    T = random_map("total", n=3, seed=11)
    H = T.head(2)
    x = np.random.default_rng(12).normal(size=(5, 3))
    np.testing.assert_array_equal(H(x[:, :2]), T(x)[:, :2])
    assert make_map(2, direction="inverse").direction is Direction.INVERSE


def test_rbf_component_starts_at_identity():
    pts = np.random.default_rng(13).normal(size=(100, 2))
    c = rbf_component(2, pts, 4)
    np.testing.assert_allclose(c.value(pts), pts[:, 1])

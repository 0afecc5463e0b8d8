import math

import numpy as np
import pytest

from trimap.basis import hermite_eval
from trimap.quadrature import (
    Provenance,
    SampleSet,
    gauss_hermite_1d,
    reference_normals,
    sample_reference,
    tensorize,
)


def test_small_rules():
    r1 = gauss_hermite_1d(1)
    np.testing.assert_allclose(r1.nodes.ravel(), [0.0], atol=1e-15)
    np.testing.assert_allclose(r1.weights, [1.0])
    r2 = gauss_hermite_1d(2)
    np.testing.assert_allclose(np.sort(r2.nodes.ravel()), [-1.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(r2.weights, [0.5, 0.5], atol=1e-14)
    r3 = gauss_hermite_1d(3)
    np.testing.assert_allclose(np.sort(r3.nodes.ravel()), [-np.sqrt(3), 0, np.sqrt(3)], atol=1e-14)
    np.testing.assert_allclose(r3.weights[np.argsort(r3.nodes.ravel())], [1 / 6, 2 / 3, 1 / 6],
                               atol=1e-14)


@pytest.mark.parametrize("order", [2, 5, 10, 20, 40, 64])
def test_exact_for_hermite_products(order):
    # measured against the normalized basis He_m / sqrt(m!)
    r = gauss_hermite_1d(order)
    x = r.nodes.ravel()
    for i in range(order):
        for j in range(order):
            if i + j > 2 * order - 1:
                continue
            norm = math.sqrt(math.factorial(i) * math.factorial(j))
            val = r.weights @ (hermite_eval(i, x) * hermite_eval(j, x)) / norm
            assert abs(val - (i == j)) < 1e-12


def test_tensor_rules():
    r = tensorize(gauss_hermite_1d(10), 2)
    assert len(r) == 100
    assert r.weights.sum() == pytest.approx(1.0, abs=1e-14)
    one = tensorize(gauss_hermite_1d(1), 5)
    assert len(one) == 1 and one.weights[0] == pytest.approx(1.0)
    np.testing.assert_allclose(one.nodes, 0.0, atol=1e-15)
    # E[x1^2 x2^2] = 1 for independent standard normals
    assert r.expect(r.nodes[:, 0] ** 2 * r.nodes[:, 1] ** 2) == pytest.approx(1.0, abs=1e-12)


def test_tensor_size_guard():
    with pytest.raises(ValueError):
        tensorize(gauss_hermite_1d(30), 6)


def test_order_bounds():
    with pytest.raises(ValueError):
        gauss_hermite_1d(0)


def test_monte_carlo_mean():
    s = sample_reference(10**6, 1, seed=5)
    assert abs(s.points.mean()) < 4 / np.sqrt(10**6)
    assert s.provenance is Provenance.REFERENCE


def test_counter_based_generation_is_chunk_independent():
    a = sample_reference(5000, 3, seed=9).points
    b = sample_reference(5000, 3, seed=9, chunk=777).points
    assert np.array_equal(a, b)
    tail = reference_normals(1000, 3, seed=9, start=4000)
    assert np.array_equal(a[4000:], tail)


def test_different_seeds_differ():
    assert not np.array_equal(reference_normals(10, 2, 1), reference_normals(10, 2, 2))


def test_sample_set_validation():
    with pytest.raises(ValueError):
        SampleSet(np.array([[0.0, np.nan]]))
    s = SampleSet(np.arange(4.0))
    assert s.dim == 1 and len(s) == 4
    rule = s.as_rule()
    assert rule.weights.sum() == pytest.approx(1.0)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trimap.basis import (
    IndexKind,
    basis_matrix,
    build_multi_index_set,
    hermite_deriv,
    hermite_eval,
    hermite_norm,
    multivariate_eval,
    multivariate_partial,
)


@pytest.mark.parametrize("degree,x,expected", [(0, 3.7, 1.0), (2, 2.0, 3.0), (3, 1.0, -2.0)])
def test_hermite_values(degree, x, expected):
    assert hermite_eval(degree, x) == pytest.approx(expected, abs=1e-14)


def test_hermite_matches_numpy_hermite_e():
    x = np.linspace(-4, 4, 41)
    for m in range(9):
        coef = np.zeros(m + 1)
        coef[m] = 1.0
        np.testing.assert_allclose(hermite_eval(m, x), np.polynomial.hermite_e.hermeval(x, coef),
                                   rtol=1e-12, atol=1e-10)


def test_hermite_norm_is_sqrt_factorial():
    assert hermite_norm(4) == pytest.approx(math.sqrt(24.0))


@pytest.mark.parametrize(
    "kind,count", [(IndexKind.TOTAL_ORDER, 10), (IndexKind.DIAGONAL, 4), (IndexKind.NO_MIXED, 7)]
)
def test_index_set_sizes(kind, count):
    s = build_multi_index_set(kind, 2, 3, 2)
    assert len(s.indices) == count


def test_diagonal_set_contents():
    s = build_multi_index_set(IndexKind.DIAGONAL, 2, 3, 2)
    assert [tuple(r) for r in s.active] == [(0, 0), (0, 1), (0, 2), (0, 3)]


@given(k=st.integers(1, 4), p=st.integers(1, 4))
def test_set_inclusions(k, p):
    sets = [{tuple(r) for r in build_multi_index_set(kind, k, p, k).indices}
            for kind in (IndexKind.DIAGONAL, IndexKind.NO_MIXED, IndexKind.TOTAL_ORDER)]
    assert sets[0] <= sets[1] <= sets[2]
    assert len(sets[2]) == math.comb(k + p, p)


def test_ordering_is_graded():
    idx = build_multi_index_set(IndexKind.TOTAL_ORDER, 3, 3, 3).indices
    assert np.all(np.diff(idx.sum(axis=1)) >= 0)
    assert tuple(idx[0]) == (0, 0, 0)


def test_invalid_sets():
    with pytest.raises(ValueError):
        build_multi_index_set(IndexKind.TOTAL_ORDER, 3, 2, 2)
    with pytest.raises(ValueError):
        build_multi_index_set(IndexKind.TOTAL_ORDER, 1, 0, 1)


def test_multivariate_examples():
    assert multivariate_eval([0, 0, 0], [0.3, -1.0, 5.0]) == 1.0
    assert multivariate_eval([1, 1], [2.0, 3.0]) == pytest.approx(6.0)
    assert multivariate_eval([2, 0], [2.0, -17.0]) == pytest.approx(3.0)


def test_derivatives_match_central_differences():
    rng = np.random.default_rng(0)
    h = 1e-6
    for m in range(1, 7):
        x = rng.uniform(-3, 3, 100)
        fd = (hermite_eval(m, x + h) - hermite_eval(m, x - h)) / (2 * h)
        exact = hermite_deriv(m, x)
        assert np.max(np.abs(fd - exact) / np.maximum(1.0, np.abs(exact))) < 1e-6
    idx = np.array([2, 1, 3])
    x = rng.uniform(-3, 3, (100, 3))
    for k in (1, 2, 3):
        e = np.zeros(3)
        e[k - 1] = h
        fd = (multivariate_eval(idx, x + e) - multivariate_eval(idx, x - e)) / (2 * h)
        exact = multivariate_partial(idx, x, k)
        assert np.max(np.abs(fd - exact) / np.maximum(1.0, np.abs(exact))) < 1e-6


def test_basis_matrix_agrees_with_pointwise_eval():
    s = build_multi_index_set(IndexKind.TOTAL_ORDER, 2, 4, 2)
    x = np.random.default_rng(1).normal(size=(20, 2))
    B = basis_matrix(s.indices, x)
    D = basis_matrix(s.indices, x, deriv=1)
    for j, idx in enumerate(s.indices):
        np.testing.assert_allclose(B[:, j], multivariate_eval(idx, x), rtol=1e-13)
        np.testing.assert_allclose(D[:, j], multivariate_partial(idx, x, 2), rtol=1e-13, atol=1e-13)


def test_orthogonality_under_gaussian():
    # Monte Carlo Gram matrix against the exact m! diagonal, within 4 standard errors
    from trimap.quadrature import reference_normals

    s = build_multi_index_set(IndexKind.TOTAL_ORDER, 2, 3, 2)
    x = reference_normals(1_000_000, 2, seed=11)
    B = basis_matrix(s.indices, x)
    G = B.T @ B / len(x)
    norms = np.prod([[math.factorial(int(j)) for j in r] for r in s.indices], axis=1)
    se = np.sqrt(np.var(B[:, :, None] * B[:, None, :], axis=0) / len(x))
    assert np.all(np.abs(G - np.diag(norms)) < 4 * se + 1e-12)


@settings(max_examples=50)
@given(st.integers(0, 8), st.floats(-4, 4))
def test_recurrence(m, x):
    # He_{m+1} = x He_m - m He_{m-1}
    lhs = hermite_eval(m + 1, x)
    rhs = x * hermite_eval(m, x) - (m * hermite_eval(m - 1, x) if m else 0.0)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)

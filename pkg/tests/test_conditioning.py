import numpy as np
import pytest

from trimap.conditioning import condition, sample_conditional
from trimap.maps import Direction, identity_map, linear_map
from trimap.quadrature import reference_normals

RHO = 0.5
L = np.array([[1.0, 0.0], [RHO, np.sqrt(1 - RHO**2)]])


@pytest.mark.parametrize("d", [1.0, -0.4, 2.5])
def test_gaussian_conditional(d):
    M = 100_000
    post = sample_conditional(condition(linear_map(L), 1, [d]), M, seed=3).points[:, 0]
    assert abs(post.mean() - RHO * d) < 4 * np.sqrt(0.75 / M)
    assert abs(post.var() - 0.75) < 4 * np.sqrt(2 * 0.75**2 / M)


def test_inverse_parent_gives_same_conditional():
    S = linear_map(np.linalg.inv(L), direction=Direction.INVERSE)
    a = sample_conditional(condition(linear_map(L), 1, [1.0]), 1000, 4).points
    b = sample_conditional(condition(S, 1, [1.0]), 1000, 4).points
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_identity_conditional_is_reference_marginal():
    cmap = condition(identity_map(3), 1, [5.0])
    w = reference_normals(10, 2, 5)
    np.testing.assert_array_equal(cmap(w), w)


def test_reconditioning_reuses_parent():
    T = linear_map(L)
    a, b = condition(T, 1, [1.0]), condition(T, 1, [2.0])
    assert a.parent is b.parent
    assert a.x_star[0] == pytest.approx(1.0) and b.x_star[0] == pytest.approx(2.0)


def test_determinism():
    T = linear_map(L)
    a = sample_conditional(condition(T, 1, [1.0]), 1, seed=9).points
    b = sample_conditional(condition(T, 1, [1.0]), 1, seed=9).points
    np.testing.assert_array_equal(a, b)
    assert np.array_equal(condition(T, 1, [1.0]).x_star, condition(T, 1, [1.0]).x_star)


def test_argument_checks():
    T = linear_map(L)
    with pytest.raises(ValueError):
        condition(T, 2, [1.0, 2.0])
    with pytest.raises(ValueError):
        condition(T, 1, [1.0, 2.0])
    with pytest.raises(ValueError):
        condition(T, 1, [1.0])(np.zeros((3, 2)))

"""Conditional sampling with a joint triangular map whose leading block holds the data."""

from dataclasses import dataclass

import numpy as np

from .errors import BracketFailure
from .maps import Direction, TriangularMap
from .quadrature import Provenance, SampleSet, reference_normals
from .solver import invert, invert_at

__all__ = ["ConditionalMap", "condition", "sample_conditional"]


@dataclass(frozen=True)
class ConditionalMap:
    """Map ``w -> T^Theta(x_star, w)`` pushing N(0, I) to the conditional at ``y_star``.

    For an inverse parent ``S`` the same conditional is reached by solving
    ``S(y_star, theta) = (x_star, w)`` pointwise.
    """

    parent: TriangularMap
    n_y: int
    y_star: np.ndarray
    x_star: np.ndarray
    tol: float = 1e-10

    @property
    def dim(self):
        return self.parent.n - self.n_y

    def __call__(self, w):
        w = np.atleast_2d(np.asarray(w, dtype=float))
        if w.shape[1] != self.dim:
            raise ValueError(f"conditional map takes {self.dim}-dimensional inputs")
        M = w.shape[0]
        x = np.hstack([np.broadcast_to(self.x_star, (M, self.n_y)), w])
        if self.parent.direction is Direction.DIRECT:
            return self.parent(x)[:, self.n_y:]
        res = invert(self.parent, x, self.tol, prefix=np.broadcast_to(self.y_star, (M, self.n_y)))
        if not res.ok:
            raise BracketFailure(f"conditional inversion failed at {res.failed.size} points",
                                 indices=res.failed)
        return res.points[:, self.n_y:]


def condition(tmap, n_y, y_star, tol=1e-10):
    """Fix the first ``n_y`` (data) coordinates of a joint map at ``y_star``.

    The reference is the standard normal, whose density factorizes over the
    data/parameter split as the construction requires.
    """
    y_star = np.atleast_1d(np.asarray(y_star, dtype=float))
    if not 1 <= n_y < tmap.n:
        raise ValueError(f"need 1 <= n_y < n (n_y={n_y}, n={tmap.n})")
    if y_star.shape != (n_y,):
        raise ValueError(f"y_star must have {n_y} entries")
    head = tmap.head(n_y)
    if tmap.direction is Direction.DIRECT:
        x_star = invert_at(head, y_star, tol)
    else:
        x_star = head(y_star)
    x_star.setflags(write=False)
    y_star.setflags(write=False)
    return ConditionalMap(tmap, n_y, y_star, x_star, tol)


def sample_conditional(cmap, M, seed):
    """``M`` draws from the conditional, reproducible from ``seed``."""
    w = reference_normals(M, cmap.dim, seed)
    return SampleSet(cmap(w), Provenance.PUSHFORWARD, seed=int(seed),
                     meta={"y_star": cmap.y_star, "x_star": cmap.x_star})

"""Univariate and tensorized basis functions.

Hermite polynomials follow the probabilists' convention (orthogonal under the
standard normal density) and are *not* normalized: ``E[He_m^2] = m!``.
Coefficients of saved maps refer to these unnormalized polynomials.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "IndexKind",
    "MultiIndexSet",
    "build_multi_index_set",
    "hermite_eval",
    "hermite_deriv",
    "hermite_table",
    "hermite_norm",
    "multivariate_eval",
    "multivariate_partial",
    "gaussian_rbf",
]


def hermite_table(x, degree):
    """Return ``He_0(x), ..., He_degree(x)`` stacked along a new last axis."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (degree + 1,))
    out[..., 0] = 1.0
    if degree >= 1:
        out[..., 1] = x
    for m in range(1, degree):
        out[..., m + 1] = x * out[..., m] - m * out[..., m - 1]
    return out


def hermite_deriv_table(x, degree, values=None):
    """Derivatives ``He_m'(x) = m He_{m-1}(x)`` for ``m = 0..degree``."""
    if values is None:
        values = hermite_table(x, degree)
    out = np.zeros_like(values)
    if degree >= 1:
        out[..., 1:] = np.arange(1, degree + 1) * values[..., :-1]
    return out


def hermite_eval(degree, x):
    """Probabilists' Hermite polynomial ``He_degree(x)``."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    return hermite_table(x, degree)[..., degree]


def hermite_deriv(degree, x):
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if degree == 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    return degree * hermite_eval(degree - 1, x)


def hermite_norm(degree):
    """L2 norm of ``He_degree`` under the standard normal, ``sqrt(degree!)``."""
    return math.sqrt(math.factorial(degree))


class IndexKind(enum.Enum):
    TOTAL_ORDER = "total"
    NO_MIXED = "nomixed"
    DIAGONAL = "diagonal"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"totalorder": "total", "total_order": "total", "to": "total",
                   "no_mixed": "nomixed", "nm": "nomixed", "d": "diagonal"}
        key = str(value).lower()
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class MultiIndexSet:
    """Multi-indices for the ``k``-th map component (1-based ``k``).

    ``indices`` is an ``(m, n)`` integer array in graded lexicographic order
    (total degree first, then higher powers of earlier coordinates first).
    """

    kind: IndexKind
    k: int
    p: int
    n: int
    indices: np.ndarray

    def __len__(self):
        return self.indices.shape[0]

    def __iter__(self):
        return (tuple(int(v) for v in row) for row in self.indices)

    def __contains__(self, item):
        item = tuple(item)
        return any(row == item for row in self)

    @property
    def active(self):
        """Indices restricted to the first ``k`` coordinates."""
        return self.indices[:, : self.k]


def _graded_lex_key(j):
    return (sum(j),) + tuple(-v for v in j)


def _compositions(total, parts):
    # all tuples of `parts` non-negative integers with sum == total
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def build_multi_index_set(kind, k, p, n):
    """Build the total-order, no-mixed or diagonal set for component ``k``."""
    kind = IndexKind.parse(kind)
    if not 1 <= k <= n:
        raise ValueError(f"component index k={k} must satisfy 1 <= k <= n={n}")
    if p < 1:
        raise ValueError(f"max degree p={p} must be >= 1")
    rows = []
    for total in range(p + 1):
        for head in _compositions(total, k):
            if kind is IndexKind.NO_MIXED and sum(1 for v in head if v) > 1:
                continue
            if kind is IndexKind.DIAGONAL and any(head[:-1]):
                continue
            rows.append(head + (0,) * (n - k))
    rows.sort(key=_graded_lex_key)
    return MultiIndexSet(kind, k, p, n, np.array(rows, dtype=int).reshape(-1, n))


def multivariate_eval(index, x):
    """Tensorized Hermite basis ``prod_i He_{j_i}(x_i)``; ``x`` may be ``(..., n)``."""
    index = np.asarray(index, dtype=int)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != index.shape[-1]:
        raise ValueError(f"dimension mismatch: index has {index.shape[-1]} entries, "
                         f"point has {x.shape[-1]}")
    out = np.ones(x.shape[:-1])
    for i, j in enumerate(index):
        if j:
            out = out * hermite_eval(int(j), x[..., i])
    return out


def multivariate_partial(index, x, k):
    """Partial derivative of the tensorized basis function w.r.t. coordinate ``k`` (1-based)."""
    index = np.asarray(index, dtype=int)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != index.shape[-1]:
        raise ValueError("dimension mismatch between index and point")
    out = np.ones(x.shape[:-1])
    for i, j in enumerate(index):
        if i == k - 1:
            out = out * hermite_deriv(int(j), x[..., i])
        elif j:
            out = out * hermite_eval(int(j), x[..., i])
    return out


def basis_matrix(indices, x, deriv=None):
    """Evaluate all basis functions of ``indices`` (``(m, d)``) at points ``x`` (``(M, >=d)``).

    With ``deriv=j`` (0-based column) the j-th factor is differentiated.
    Returns an ``(M, m)`` array.
    """
    indices = np.asarray(indices, dtype=int)
    x = np.asarray(x, dtype=float)
    M = x.shape[0]
    m, d = indices.shape
    out = np.ones((M, m))
    if m == 0:
        return out
    for i in range(d):
        col = indices[:, i]
        top = int(col.max())
        if top == 0 and deriv != i:
            continue
        vals = hermite_table(x[:, i], max(top, 0))
        if deriv == i:
            vals = hermite_deriv_table(x[:, i], top, vals)
        out *= vals[:, col]
    return out


def gaussian_rbf(x, center, scale):
    """Isotropic Gaussian kernel ``exp(-|x - c|^2 / (2 s^2))`` over the last axis."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum((x - np.asarray(center, dtype=float)) ** 2, axis=-1)
    return np.exp(-0.5 * r2 / scale**2)

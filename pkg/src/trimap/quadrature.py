"""Standard-normal reference measure: Gauss-Hermite rules and reproducible draws."""

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import ndtri

__all__ = [
    "QuadratureRule",
    "SampleSet",
    "Provenance",
    "gauss_hermite_1d",
    "tensorize",
    "sample_reference",
    "reference_normals",
    "MAX_GRID_NODES",
]

MAX_GRID_NODES = 10**7


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes ``(M, n)`` and probability weights ``(M,)`` for E[.] under N(0, I)."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        weights = np.asarray(self.weights, dtype=float).ravel()
        if nodes.shape[0] != weights.shape[0]:
            raise ValueError("nodes and weights disagree in length")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("quadrature nodes must be finite")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self):
        return self.nodes.shape[1]

    def __len__(self):
        return self.nodes.shape[0]

    def expect(self, values):
        """Weighted sum over the leading axis of ``values``."""
        return np.tensordot(self.weights, np.asarray(values, dtype=float), axes=(0, 0))


class Provenance(enum.Enum):
    REFERENCE = "reference"
    TARGET = "target"
    PUSHFORWARD = "pushforward"
    PULLBACK = "pullback"


@dataclass
class SampleSet:
    points: np.ndarray
    provenance: Provenance = Provenance.TARGET
    seed: int = None
    weights: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] < 1:
            raise ValueError("a sample set needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("sample points must be finite")
        self.points = pts
        self.provenance = Provenance(self.provenance)

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def as_rule(self):
        """Equal-weight (or stored-weight) rule over the points."""
        w = self.weights if self.weights is not None else np.full(len(self), 1.0 / len(self))
        return QuadratureRule(self.points, w)


def gauss_hermite_1d(order):
    """Gauss-Hermite rule for the standard normal via Golub-Welsch.

    The Jacobi matrix of the probabilists' recurrence has zero diagonal and
    off-diagonal ``sqrt(m)``; weights are the squared first eigenvector entries.
    """
    if not 1 <= int(order) <= 64:
        raise ValueError(f"order {order} outside 1..64")
    order = int(order)
    if order == 1:
        return QuadratureRule(np.zeros((1, 1)), np.ones(1))
    off = np.sqrt(np.arange(1, order, dtype=float))
    nodes = eigh_tridiagonal(np.zeros(order), off, eigvals_only=True)
    # polish the eigenvalues with Newton steps on the normalized polynomial and
    # take weights from the Christoffel formula; squared eigenvector entries
    # lose all relative accuracy for the tiny tail weights at high order
    for _ in range(2):
        h, hprev = _normalized_hermite_pair(nodes, order)
        nodes = nodes - h / (np.sqrt(order) * hprev)
    nodes = 0.5 * (nodes - nodes[::-1])
    _, hprev = _normalized_hermite_pair(nodes, order)
    weights = 1.0 / (order * hprev**2)
    weights = 0.5 * (weights + weights[::-1])
    weights /= weights.sum()
    return QuadratureRule(nodes[:, None], weights)


def _normalized_hermite_pair(x, m):
    """``He_m / sqrt(m!)`` and ``He_{m-1} / sqrt((m-1)!)`` at ``x``."""
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    for k in range(m):
        prev, cur = cur, (x * cur - np.sqrt(k) * prev) / np.sqrt(k + 1)
    return cur, prev


def tensorize(rule_1d, n):
    """Full tensor-product rule in ``n`` dimensions (first coordinate varies slowest)."""
    m = len(rule_1d)
    if m**n > MAX_GRID_NODES:
        raise ValueError(f"tensor grid of {m}^{n} nodes exceeds guard {MAX_GRID_NODES}")
    x = rule_1d.nodes[:, 0]
    grids = np.meshgrid(*([x] * n), indexing="ij")
    wgrids = np.meshgrid(*([rule_1d.weights] * n), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return QuadratureRule(nodes, weights)


# Philox emits 4 words per counter increment; each point owns a whole number of blocks
def _block_stride(n):
    return -(-n // 4)


def reference_normals(count, n, seed, start=0):
    """``count`` standard-normal points in R^n, point ``i`` drawn from counter block ``start + i``.

    Uses inverse-CDF transformation of Philox uniforms, so point ``i`` does not
    depend on how the batch is split or on how many points precede it.
    """
    stride = _block_stride(n)
    bitgen = np.random.Philox(key=int(seed))
    if start:
        bitgen.advance(start * stride)
    u = np.random.Generator(bitgen).random(count * stride * 4).reshape(count, stride * 4)[:, :n]
    # random() yields multiples of 2**-53 in [0, 1); shift to the open interval
    return ndtri(u + 2.0**-54)


def sample_reference(M, n, seed, start=0, chunk=None):
    """Draw an i.i.d. N(0, I_n) :class:`SampleSet` reproducibly from ``seed``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if chunk is None:
        pts = reference_normals(M, n, seed, start)
    else:
        pts = np.vstack([reference_normals(min(chunk, M - i), n, seed, start + i)
                         for i in range(0, M, chunk)])
    return SampleSet(pts, Provenance.REFERENCE, seed=int(seed))

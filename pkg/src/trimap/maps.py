"""Monotone lower-triangular maps and their per-component parameterizations."""

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.cluster.vq import kmeans2
from scipy.spatial.distance import pdist

from .basis import IndexKind, basis_matrix, build_multi_index_set
from .errors import NonMonotoneAtPoint

__all__ = [
    "Direction",
    "MapComponent",
    "PolynomialComponent",
    "RBFComponent",
    "IntegratedExponentialComponent",
    "TriangularMap",
    "OptimizationReport",
    "make_map",
    "polynomial_component",
    "integrated_exponential_component",
    "rbf_component",
    "identity_map",
    "linear_map",
]


class Direction(enum.Enum):
    DIRECT = "direct"
    INVERSE = "inverse"


def _as_points(x, n):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != n:
        raise ValueError(f"dimension mismatch: map has n={n}, points have {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input point")
    return x, single


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class MapComponent:
    """One output coordinate ``T^k`` (``k`` is 1-based) reading inputs ``x_1..x_k``.

    All evaluation methods take points of shape ``(M, d)`` with ``d >= k`` and
    ignore columns beyond ``k``.
    """

    kind = None
    monotone = False

    def __init__(self, k, coeffs):
        self.k = int(k)
        self.coeffs = _frozen(coeffs)
        if self.coeffs.shape != (self.ncoef,):
            raise ValueError(f"component {k}: expected {self.ncoef} coefficients, "
                             f"got {self.coeffs.shape}")

    @property
    def ncoef(self):
        raise NotImplementedError

    def with_coeffs(self, coeffs):
        raise NotImplementedError

    def value(self, x):
        raise NotImplementedError

    def diag(self, x):
        """Partial derivative with respect to the k-th input."""
        raise NotImplementedError

    def grad_value(self, x):
        """``(M, ncoef)`` derivative of the value with respect to the coefficients."""
        raise NotImplementedError

    def grad_diag(self, x):
        """``(M, ncoef)`` derivative of :meth:`diag` with respect to the coefficients."""
        raise NotImplementedError

    def grad_log_diag(self, x):
        d = self.diag(x)
        return self.grad_diag(x) / d[:, None]

    def input_grad(self, x):
        """``(M, k)`` gradient of the value with respect to ``x_1..x_k``."""
        raise NotImplementedError


class LinearComponent(MapComponent):
    """Components that are linear in their coefficients, ``T^k = F(x) c``."""

    def features(self, x):
        raise NotImplementedError

    def features_partial(self, x, j):
        raise NotImplementedError

    def value(self, x):
        return self.features(x) @ self.coeffs

    def diag(self, x):
        return self.features_partial(x, self.k - 1) @ self.coeffs

    def grad_value(self, x):
        return self.features(x)

    def grad_diag(self, x):
        return self.features_partial(x, self.k - 1)

    def input_grad(self, x):
        return np.stack([self.features_partial(x, j) @ self.coeffs for j in range(self.k)],
                        axis=1)


class PolynomialComponent(LinearComponent):
    """Hermite expansion ``sum_j c_j psi_j(x_1..x_k)`` over a multi-index set."""

    kind = "polynomial"

    def __init__(self, k, indices, coeffs):
        indices = np.asarray(indices, dtype=int)
        if indices.ndim != 2 or indices.shape[1] < k:
            raise ValueError("multi-indices must have at least k columns")
        if np.any(indices[:, k:]):
            raise ValueError("multi-index violates the lower-triangular constraint")
        if np.any(indices < 0):
            raise ValueError("negative multi-index entry")
        self.indices = indices[:, :k].copy()
        self.indices.setflags(write=False)
        super().__init__(k, coeffs)

    @property
    def ncoef(self):
        return self.indices.shape[0]

    @property
    def degree(self):
        return int(self.indices.sum(axis=1).max())

    def with_coeffs(self, coeffs):
        return PolynomialComponent(self.k, self.indices, coeffs)

    def features(self, x):
        return basis_matrix(self.indices, x[:, : self.k])

    def features_partial(self, x, j):
        return basis_matrix(self.indices, x[:, : self.k], deriv=j)


class RBFComponent(LinearComponent):
    """Affine part plus isotropic Gaussian kernels.

    Coefficient layout: ``[a_0, a_1..a_k, b_1..b_P]``.
    """

    kind = "rbf"

    def __init__(self, k, centers, scales, coeffs):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        scales = np.asarray(scales, dtype=float).ravel()
        if centers.size == 0:
            centers = np.zeros((0, k))
        if centers.shape[1] != k:
            raise ValueError(f"RBF centers must lie in R^{k}")
        if centers.shape[0] != scales.shape[0]:
            raise ValueError("one scale per center required")
        if np.any(scales <= 0):
            raise ValueError("RBF scales must be positive")
        self.centers = centers
        self.scales = scales
        super().__init__(k, coeffs)

    @property
    def ncoef(self):
        return 1 + self.k + self.centers.shape[0]

    def with_coeffs(self, coeffs):
        return RBFComponent(self.k, self.centers, self.scales, coeffs)

    def _kernels(self, x):
        diff = x[:, None, : self.k] - self.centers[None]
        return np.exp(-0.5 * np.sum(diff**2, axis=2) / self.scales**2), diff

    def features(self, x):
        phi, _ = self._kernels(x)
        return np.hstack([np.ones((x.shape[0], 1)), x[:, : self.k], phi])

    def features_partial(self, x, j):
        phi, diff = self._kernels(x)
        lin = np.zeros((x.shape[0], 1 + self.k))
        lin[:, 1 + j] = 1.0
        return np.hstack([lin, -phi * diff[:, :, j] / self.scales**2])


class IntegratedExponentialComponent(MapComponent):
    """``T^k = a(x_1..x_{k-1}) + int_0^{x_k} exp(b(x_1..x_{k-1}, w)) dw``.

    ``a`` and ``b`` are Hermite expansions; ``a_indices`` has a zero last
    column. The integral uses ``quad_order``-point Gauss-Legendre on the
    signed interval ``[0, x_k]``. Coefficient layout: ``[a..., b...]``.
    """

    kind = "intexp"
    monotone = True

    def __init__(self, k, a_indices, b_indices, coeffs, quad_order=32):
        a_indices = np.asarray(a_indices, dtype=int).reshape(-1, k)
        b_indices = np.asarray(b_indices, dtype=int).reshape(-1, k)
        if np.any(a_indices[:, k - 1]):
            raise ValueError("the a-part may not depend on x_k")
        if quad_order < 1:
            raise ValueError("quadrature order must be >= 1")
        self.a_indices = a_indices
        self.b_indices = b_indices
        self.quad_order = int(quad_order)
        t, w = leggauss(self.quad_order)
        self._qt = 0.5 * (t + 1.0)
        self._qw = 0.5 * w
        super().__init__(k, coeffs)

    @property
    def ncoef(self):
        return self.a_indices.shape[0] + self.b_indices.shape[0]

    @property
    def a_coeffs(self):
        return self.coeffs[: self.a_indices.shape[0]]

    @property
    def b_coeffs(self):
        return self.coeffs[self.a_indices.shape[0]:]

    def with_coeffs(self, coeffs):
        return IntegratedExponentialComponent(self.k, self.a_indices, self.b_indices,
                                              coeffs, self.quad_order)

    def _quad_points(self, x):
        # (M*Q, k) points (x_1..x_{k-1}, t_q x_k)
        xk = x[:, : self.k]
        M, Q = xk.shape[0], self.quad_order
        pts = np.repeat(xk, Q, axis=0)
        pts[:, self.k - 1] = (xk[:, self.k - 1][:, None] * self._qt[None, :]).ravel()
        return pts, M, Q

    def _integrand(self, x):
        pts, M, Q = self._quad_points(x)
        Fb = basis_matrix(self.b_indices, pts)
        e = np.exp(Fb @ self.b_coeffs).reshape(M, Q)
        return pts, Fb, e

    def value(self, x):
        a = basis_matrix(self.a_indices, x[:, : self.k]) @ self.a_coeffs
        _, _, e = self._integrand(x)
        return a + x[:, self.k - 1] * (e @ self._qw)

    def diag(self, x):
        return np.exp(basis_matrix(self.b_indices, x[:, : self.k]) @ self.b_coeffs)

    def grad_value(self, x):
        Fa = basis_matrix(self.a_indices, x[:, : self.k])
        _, Fb, e = self._integrand(x)
        M, Q = e.shape
        wq = (e * self._qw[None, :]).reshape(M * Q, 1)
        gb = (Fb * wq).reshape(M, Q, -1).sum(axis=1) * x[:, self.k - 1][:, None]
        return np.hstack([Fa, gb])

    def grad_log_diag(self, x):
        Fb = basis_matrix(self.b_indices, x[:, : self.k])
        return np.hstack([np.zeros((x.shape[0], self.a_indices.shape[0])), Fb])

    def grad_diag(self, x):
        return self.grad_log_diag(x) * self.diag(x)[:, None]

    def input_grad(self, x):
        M = x.shape[0]
        out = np.empty((M, self.k))
        pts, M, Q = self._quad_points(x)
        e = np.exp(basis_matrix(self.b_indices, pts) @ self.b_coeffs).reshape(M, Q)
        xk = x[:, self.k - 1]
        for j in range(self.k - 1):
            da = basis_matrix(self.a_indices, x[:, : self.k], deriv=j) @ self.a_coeffs
            db = (basis_matrix(self.b_indices, pts, deriv=j) @ self.b_coeffs).reshape(M, Q)
            out[:, j] = da + xk * ((e * db) @ self._qw)
        out[:, self.k - 1] = self.diag(x)
        return out


@dataclass
class OptimizationReport:
    """Outcome of a map optimization."""

    objective: float
    gradient_norm: float
    iterations: int
    converged: bool = True
    kl_variance_estimate: float = float("nan")
    log_normalizing_constant: float = float("nan")
    monotonicity_violations: int = 0
    n_nodes: int = 0
    message: str = ""
    trace: list = field(default_factory=list)
    components: list = field(default_factory=list)

    def as_dict(self):
        out = {
            "objective": self.objective,
            "gradient_norm": self.gradient_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "kl_variance_estimate": self.kl_variance_estimate,
            "log_normalizing_constant": self.log_normalizing_constant,
            "monotonicity_violations": self.monotonicity_violations,
            "n_nodes": self.n_nodes,
            "message": self.message,
        }
        return out


class TriangularMap:
    """Lower-triangular map ``x -> (T^1(x_1), ..., T^n(x_1..x_n))``.

    An optional affine pre-map standardizes inputs, ``z = (x - shift) / scale``,
    before the components are evaluated; all derivatives returned here are with
    respect to the raw input ``x``.
    """

    def __init__(self, components, direction=Direction.DIRECT, shift=None, scale=None):
        self.components = tuple(components)
        self.n = len(self.components)
        for i, c in enumerate(self.components):
            if c.k != i + 1:
                raise ValueError(f"component {i + 1} reads k={c.k} inputs")
        self.direction = Direction(direction)
        if (shift is None) != (scale is None):
            raise ValueError("shift and scale must be given together")
        if shift is not None:
            shift, scale = _frozen(shift), _frozen(scale)
            if shift.shape != (self.n,) or scale.shape != (self.n,):
                raise ValueError("pre-map needs n shifts and n scales")
            if np.any(scale <= 0):
                raise ValueError("pre-map scales must be positive")
        self.shift = shift
        self.scale = scale

    @property
    def has_premap(self):
        return self.shift is not None

    @property
    def monotone(self):
        return all(c.monotone for c in self.components)

    def __repr__(self):
        kinds = ",".join(c.kind for c in self.components)
        return f"TriangularMap(n={self.n}, direction={self.direction.value}, kinds=[{kinds}])"

    # coefficient handling

    @property
    def coefficients(self):
        return [c.coeffs for c in self.components]

    @property
    def sizes(self):
        return [c.ncoef for c in self.components]

    def flat_coefficients(self):
        return np.concatenate(self.coefficients)

    def with_coefficients(self, coeffs):
        """New map with per-component coefficient arrays (list) or a flat vector."""
        if isinstance(coeffs, np.ndarray) and coeffs.ndim == 1 and len(coeffs) == sum(self.sizes):
            coeffs = np.split(coeffs, np.cumsum(self.sizes)[:-1])
        comps = [c.with_coeffs(v) for c, v in zip(self.components, coeffs)]
        return self.replace(components=comps)

    def replace(self, components=None, direction=None, shift=None, scale=None, keep_premap=True):
        if keep_premap and shift is None:
            shift, scale = self.shift, self.scale
        return TriangularMap(self.components if components is None else components,
                             self.direction if direction is None else direction,
                             shift, scale)

    def head(self, m):
        """Map formed by the first ``m`` components (a self-contained triangular map)."""
        shift = None if self.shift is None else self.shift[:m]
        scale = None if self.scale is None else self.scale[:m]
        return TriangularMap(self.components[:m], self.direction, shift, scale)

    # evaluation

    def _standardize(self, x):
        if self.shift is None:
            return x
        return (x - self.shift) / self.scale

    def _inv_scale(self):
        return np.ones(self.n) if self.scale is None else 1.0 / self.scale

    def evaluate(self, x):
        x, single = _as_points(x, self.n)
        z = self._standardize(x)
        out = np.column_stack([c.value(z) for c in self.components])
        return out[0] if single else out

    __call__ = evaluate

    def evaluate_component(self, k, x):
        """Component ``k`` (1-based) at points ``x`` of shape ``(M, >=k)`` (raw inputs)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = x[:, :k]
        if self.shift is not None:
            z = (z - self.shift[:k]) / self.scale[:k]
        return self.components[k - 1].value(z)

    def component_diag(self, k, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = x[:, :k]
        if self.shift is not None:
            z = (z - self.shift[:k]) / self.scale[:k]
        return self.components[k - 1].diag(z) * self._inv_scale()[k - 1]

    def diag_jacobian(self, x):
        x, single = _as_points(x, self.n)
        z = self._standardize(x)
        out = np.column_stack([c.diag(z) for c in self.components]) * self._inv_scale()
        return out[0] if single else out

    def log_det_jacobian(self, x):
        """``sum_k log d_k T^k``; raises :class:`NonMonotoneAtPoint` on a non-positive partial."""
        x, single = _as_points(x, self.n)
        d = self.diag_jacobian(x)
        bad = np.argwhere(~(d > 0))
        if bad.size:
            i, k = bad[0]
            raise NonMonotoneAtPoint(int(k) + 1, x[i].copy(), float(d[i, k]))
        out = np.sum(np.log(d), axis=1)
        return out[0] if single else out

    def jacobian(self, x):
        """Full lower-triangular Jacobian, shape ``(M, n, n)``."""
        x, single = _as_points(x, self.n)
        z = self._standardize(x)
        inv = self._inv_scale()
        J = np.zeros((x.shape[0], self.n, self.n))
        for i, c in enumerate(self.components):
            J[:, i, : i + 1] = c.input_grad(z) * inv[: i + 1]
        return J[0] if single else J

    def coefficient_gradient(self, x, which="value"):
        """Per-component coefficient gradients, a list of ``(M, ncoef_k)`` arrays.

        ``which="value"`` gives dT^k/dc; ``which="logdiag"`` gives
        d log(d_k T^k)/dc and raises on non-positive partials.
        """
        x, single = _as_points(x, self.n)
        z = self._standardize(x)
        if which == "value":
            grads = [c.grad_value(z) for c in self.components]
        elif which in ("logdiag", "log_diag_partial"):
            d = self.diag_jacobian(x)
            bad = np.argwhere(~(d > 0))
            if bad.size:
                i, k = bad[0]
                raise NonMonotoneAtPoint(int(k) + 1, x[i].copy(), float(d[i, k]))
            grads = [c.grad_log_diag(z) for c in self.components]
        else:
            raise ValueError(f"unknown gradient kind {which!r}")
        return [g[0] for g in grads] if single else grads


def polynomial_component(k, n, degree, kind=IndexKind.TOTAL_ORDER, coeffs=None):
    """Identity-initialized Hermite component for output ``k``."""
    mset = build_multi_index_set(kind, k, degree, n)
    idx = mset.active
    if coeffs is None:
        coeffs = np.zeros(len(idx))
        unit = np.zeros(k, dtype=int)
        unit[k - 1] = 1
        coeffs[np.flatnonzero(np.all(idx == unit, axis=1))[0]] = 1.0
    return PolynomialComponent(k, idx, coeffs)


def integrated_exponential_component(k, n, a_degree, b_degree, quad_order=32, coeffs=None):
    """Identity-initialized monotone component (``a = 0``, ``b = 0``)."""
    if k == 1:
        a_idx = np.zeros((1, 1), dtype=int)
    else:
        a_set = build_multi_index_set(IndexKind.TOTAL_ORDER, k - 1, max(a_degree, 1), n)
        a_idx = a_set.active
        a_idx = a_idx[a_idx.sum(axis=1) <= a_degree]
        a_idx = np.hstack([a_idx, np.zeros((len(a_idx), 1), dtype=int)])
    if b_degree == 0:
        b_idx = np.zeros((1, k), dtype=int)
    else:
        b_idx = build_multi_index_set(IndexKind.TOTAL_ORDER, k, b_degree, n).active
    if coeffs is None:
        coeffs = np.zeros(len(a_idx) + len(b_idx))
    return IntegratedExponentialComponent(k, a_idx, b_idx, coeffs, quad_order)


def rbf_component(k, points, n_centers, seed=0, coeffs=None):
    """Identity-initialized linear+RBF component with k-means centers.

    Centers come from k-means on ``points[:, :k]``; every kernel gets the
    median pairwise distance between centers as its scale.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))[:, :k]
    if n_centers > 0:
        centers, _ = kmeans2(pts, n_centers, seed=seed, minit="++")
        dist = pdist(centers) if n_centers > 1 else np.array([pts.std() or 1.0])
        scale = float(np.median(dist)) or 1.0
        scales = np.full(n_centers, scale)
    else:
        centers, scales = np.zeros((0, k)), np.zeros(0)
    if coeffs is None:
        coeffs = np.zeros(1 + k + n_centers)
        coeffs[k] = 1.0
    return RBFComponent(k, centers, scales, coeffs)


def make_map(n, kind="total", degree=1, direction=Direction.DIRECT, quad_order=32,
             points=None, n_centers=None, shift=None, scale=None, seed=0):
    """Identity-initialized map template.

    ``kind`` is one of ``total``, ``nomixed``, ``diagonal`` (Hermite polynomials),
    ``monotone`` (integrated exponential, ``a`` of degree ``degree`` and ``b``
    of degree ``degree - 1``) or ``rbf`` (needs ``points``).
    """
    kind = str(kind).lower()
    comps = []
    for k in range(1, n + 1):
        if kind == "monotone":
            comps.append(integrated_exponential_component(k, n, degree, degree - 1, quad_order))
        elif kind == "rbf":
            if points is None:
                raise ValueError("RBF templates need points to place centers")
            z = np.asarray(points, dtype=float)
            if shift is not None:
                z = (z - shift) / scale
            comps.append(rbf_component(k, z, n_centers or 2 * degree, seed=seed))
        else:
            comps.append(polynomial_component(k, n, degree, IndexKind.parse(kind)))
    return TriangularMap(comps, direction, shift, scale)


def identity_map(n, direction=Direction.DIRECT):
    return make_map(n, "total", 1, direction)


def linear_map(L, b=None, direction=Direction.DIRECT):
    """Affine lower-triangular map ``x -> b + L x`` as degree-1 Hermite components."""
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
    if np.any(np.triu(L, 1)):
        raise ValueError("L must be lower triangular")
    comps = []
    for k in range(1, n + 1):
        comp = polynomial_component(k, n, 1)
        c = np.zeros(comp.ncoef)
        for row, j in enumerate(comp.indices):
            if j.sum() == 0:
                c[row] = b[k - 1]
            else:
                c[row] = L[k - 1, int(np.argmax(j))]
        comps.append(comp.with_coeffs(c))
    return TriangularMap(comps, direction)

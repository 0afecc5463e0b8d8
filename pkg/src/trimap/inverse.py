"""Inverse transport: maps from target samples, plus regression of the direct map."""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.optimize import minimize

from ._parallel import ordered_map
from .errors import NonMonotoneAtPoint
from .maps import Direction, LinearComponent, OptimizationReport, make_map
from .optimize import lbfgs, newton
from .quadrature import SampleSet

__all__ = [
    "inverse_component_objective",
    "build_inverse",
    "regression_objective",
    "regress_direct_from_pairs",
    "GaussianityReport",
    "gaussianity_check",
]

log = logging.getLogger(__name__)


def _points(samples):
    if isinstance(samples, SampleSet):
        return samples.points
    return np.atleast_2d(np.asarray(samples, dtype=float))


def inverse_component_objective(component, samples, shift=None, scale=None,
                                constraint="pointwise", eps=0.0):
    """``mean_i [ S^k(y_i)^2 / 2 - log d_k S^k(y_i) ]`` and its coefficient gradient.

    ``shift``/``scale`` is the affine standardization applied before the
    component; the partial derivative is taken with respect to the raw ``y_k``.
    A partial ``<= eps`` at a sample gives ``+inf`` with ``constraint="pointwise"``
    and raises :class:`NonMonotoneAtPoint` with ``constraint="strict"``.
    """
    if constraint not in ("pointwise", "strict"):
        raise ValueError(f"unknown constraint mode {constraint!r}")
    y = _points(samples)
    k = component.k
    z = y[:, :k]
    log_scale = 0.0
    if shift is not None:
        z = (z - shift[:k]) / scale[:k]
        log_scale = np.log(scale[k - 1])
    d = component.diag(z)
    if np.any(~(d > eps)):
        if constraint == "pointwise" or component.monotone:
            return np.inf, np.zeros(component.ncoef)
        i = int(np.argmax(~(d > eps)))
        raise NonMonotoneAtPoint(k, y[i].copy(), float(d[i]))
    s = component.value(z)
    M = len(s)
    value = float(np.mean(0.5 * s**2 - np.log(d)) + log_scale)
    grad = (s @ component.grad_value(z) - np.sum(component.grad_log_diag(z), axis=0)) / M
    return value, grad


def _linear_problem(component, z, log_scale, eps):
    F = component.features(z)
    Fd = component.features_partial(z, component.k - 1)
    M = F.shape[0]

    def fgh(c):
        d = Fd @ c
        if np.any(~(d > eps)):
            return np.inf, np.zeros_like(c), None
        s = F @ c
        f = float(np.mean(0.5 * s**2 - np.log(d)) + log_scale)
        g = (F.T @ s - Fd.T @ (1.0 / d)) / M
        Fw = Fd / d[:, None]
        H = (F.T @ F + Fw.T @ Fw) / M
        return f, g, H

    return fgh


def _build_component(comp, y, shift, scale, solver, gtol, maxiter, eps):
    k = comp.k
    z = y[:, :k]
    log_scale = 0.0
    if shift is not None:
        z = (z - shift[:k]) / scale[:k]
        log_scale = float(np.log(scale[k - 1]))
    if solver == "auto":
        solver = "newton" if isinstance(comp, LinearComponent) else "lbfgs"
    if solver == "newton":
        if not isinstance(comp, LinearComponent):
            raise ValueError("Newton solver needs a parameterization linear in its coefficients")
        res = newton(_linear_problem(comp, z, log_scale, eps), comp.coeffs,
                     gtol=gtol, maxiter=maxiter)
    else:
        def fg(c):
            with np.errstate(over="ignore", under="ignore"):
                return inverse_component_objective(comp.with_coeffs(c), z, None, None,
                                                   "pointwise", eps)

        res = lbfgs(fg, comp.coeffs, gtol=gtol, maxiter=maxiter)
        res.fun += log_scale
    if not res.converged:
        log.warning("inverse component %d did not converge: %s", k, res.message)
    return comp.with_coeffs(res.x), res


def build_inverse(samples, template=None, kind="total", degree=1, standardize=True,
                  components=None, solver="auto", gtol=1e-10, maxiter=None, eps=0.0,
                  quad_order=32, n_centers=None, threads=None):
    """Fit the inverse map ``S`` (target -> standard normal) from samples.

    Each component solves its own convex problem; ``components`` (1-based)
    restricts the build to a subset, leaving the others at the template.
    Returns ``(map, OptimizationReport)`` with per-component results in
    ``report.components``.
    """
    y = _points(samples)
    M, n = y.shape
    if template is None:
        shift = scale = None
        if standardize:
            shift = y.mean(axis=0)
            scale = y.std(axis=0)
            scale[scale == 0] = 1.0
        template = make_map(n, kind, degree, Direction.INVERSE, quad_order=quad_order,
                            points=y, n_centers=n_centers, shift=shift, scale=scale)
    elif template.n != n:
        raise ValueError("template dimension differs from sample dimension")
    if maxiter is None:
        maxiter = 100 if solver != "lbfgs" else 500
    for c in template.components:
        if c.ncoef > M:
            warnings.warn(f"component {c.k} has {c.ncoef} coefficients but only {M} samples",
                          stacklevel=2)
    todo = range(1, n + 1) if components is None else sorted(set(components))

    def work(k):
        return _build_component(template.components[k - 1], y, template.shift, template.scale,
                                solver, gtol, maxiter, eps)

    results = dict(zip(todo, ordered_map(work, todo, threads)))
    comps = [results[k][0] if k in results else c
             for k, c in enumerate(template.components, start=1)]
    smap = template.replace(components=comps)
    per = []
    for k, (_, res) in results.items():
        per.append(OptimizationReport(objective=res.fun, gradient_norm=res.grad_norm,
                                      iterations=res.iterations, converged=res.converged,
                                      n_nodes=M, message=f"component {k}: {res.message}",
                                      trace=res.trace))
    d = smap.diag_jacobian(y)
    report = OptimizationReport(
        objective=float(sum(r.objective for r in per)),
        gradient_norm=float(np.sqrt(sum(r.gradient_norm**2 for r in per))),
        iterations=int(max((r.iterations for r in per), default=0)),
        converged=all(r.converged for r in per),
        monotonicity_violations=int(np.sum(np.any(~(d > 0), axis=1))),
        n_nodes=M, message="; ".join(r.message for r in per), components=per)
    return smap, report


def regression_objective(component, x, target_values):
    """``sum_i (T^k(x_i) - y_i)^2 / 2`` and its coefficient gradient."""
    r = component.value(x) - target_values
    return 0.5 * float(r @ r), r @ component.grad_value(x)


def _constrained_lsq(F, Fd, yk, c, eps, rounds=20):
    G = F.T @ F
    h = F.T @ yk
    active = np.zeros(F.shape[0], dtype=bool)
    for _ in range(rounds):
        bad = ~(Fd @ c > eps)
        if not bad.any():
            break
        active |= bad
        A = Fd[active]
        res = minimize(lambda v: 0.5 * v @ G @ v - h @ v, c, jac=lambda v: G @ v - h,
                       method="SLSQP",
                       constraints=[{"type": "ineq", "fun": lambda v: A @ v - 2 * eps,
                                     "jac": lambda v: A}],
                       options={"maxiter": 500, "ftol": 1e-14})
        c = res.x
    return c


def regress_direct_from_pairs(x, y, template=None, kind="total", degree=1, eps=1e-6,
                              enforce_monotone=True, threads=None, return_info=False):
    """Least-squares fit of a direct map ``T`` with ``T(x_i) ~ y_i``, one component at a time.

    ``x`` are reference-space points (typically ``S(y)``). Near-singular
    designs get a small ridge term; when ``enforce_monotone`` is set, training
    points where ``d_k T^k <= eps`` are turned into linear constraints.
    """
    x = _points(x)
    y = _points(y)
    if x.shape != y.shape:
        raise ValueError("pairs must have matching shapes")
    n = x.shape[1]
    if template is None:
        template = make_map(n, kind, degree, Direction.DIRECT, points=x)
    info = {}

    def work(k):
        comp = template.components[k - 1]
        z = x[:, :k] if template.shift is None else (x[:, :k] - template.shift[:k]) / template.scale[:k]
        yk = y[:, k - 1]
        if isinstance(comp, LinearComponent):
            F = comp.features(z)
            c, _, rank, sv = np.linalg.lstsq(F, yk, rcond=None)
            if rank < F.shape[1] or sv[0] > 1e12 * sv[-1]:
                warnings.warn(f"component {k}: near-singular design, adding ridge term",
                              stacklevel=3)
                G = F.T @ F
                lam = 1e-10 * np.trace(G) / G.shape[0]
                c = np.linalg.solve(G + lam * np.eye(G.shape[0]), F.T @ yk)
            if enforce_monotone:
                Fd = comp.features_partial(z, k - 1)
                if np.any(~(Fd @ c > eps)):
                    c = _constrained_lsq(F, Fd, yk, c, eps)
            new = comp.with_coeffs(c)
        else:
            res = lbfgs(lambda cc: regression_objective(comp.with_coeffs(cc), z, yk),
                        comp.coeffs, gtol=1e-10, maxiter=1000)
            new = comp.with_coeffs(res.x)
        resid = new.value(z) - yk
        viol = int(np.sum(~(new.diag(z) > 0)))
        return new, {"rms": float(np.sqrt(np.mean(resid**2))), "violations": viol}

    out = ordered_map(work, range(1, n + 1), threads)
    tmap = template.replace(components=[c for c, _ in out])
    info = {k + 1: v for k, (_, v) in enumerate(out)}
    for k, v in info.items():
        if v["violations"]:
            log.warning("regressed component %d is non-monotone at %d training points",
                        k, v["violations"])
    return (tmap, info) if return_info else tmap


@dataclass
class GaussianityReport:
    """Moment z-scores and KS distances of samples against N(0, I)."""

    n_samples: int
    mean: np.ndarray
    variance: np.ndarray
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    z_mean: np.ndarray
    z_variance: np.ndarray
    z_skewness: np.ndarray
    z_kurtosis: np.ndarray
    correlation: np.ndarray
    z_correlation: np.ndarray
    ks_distance: np.ndarray
    ks_pvalue: np.ndarray
    z_threshold: float
    passed: bool
    failures: list = field(default_factory=list)

    def lines(self):
        out = [f"gaussianity samples={self.n_samples} threshold={self.z_threshold:g} "
               f"pass={'yes' if self.passed else 'no'}"]
        for j in range(len(self.mean)):
            out.append(
                f"coord {j + 1} mean={self.mean[j]:.6g} (z={self.z_mean[j]:.3g}) "
                f"var={self.variance[j]:.6g} (z={self.z_variance[j]:.3g}) "
                f"skew={self.skewness[j]:.4g} (z={self.z_skewness[j]:.3g}) "
                f"exkurt={self.excess_kurtosis[j]:.4g} (z={self.z_kurtosis[j]:.3g}) "
                f"ks={self.ks_distance[j]:.4g} (p={self.ks_pvalue[j]:.3g})")
        for f in self.failures:
            out.append(f"fail {f}")
        return out


def gaussianity_check(samples, z_threshold=4.0, ks_alpha=1e-4):
    """Test pushforward samples for independent standard-normal coordinates.

    Per coordinate: mean, variance, skewness and excess kurtosis with their
    asymptotic standard errors under N(0, 1), plus the Kolmogorov-Smirnov
    distance to Phi. Pairwise correlations are scored with Fisher's z.
    """
    x = _points(samples)
    M, n = x.shape
    if M < 100:
        warnings.warn("fewer than 100 samples; moment z-scores are unreliable", stacklevel=2)
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    skew = stats.skew(x, axis=0)
    kurt = stats.kurtosis(x, axis=0)
    z_mean = mean * np.sqrt(M)
    z_var = (var - 1.0) / np.sqrt(2.0 / M)
    z_skew = skew / np.sqrt(6.0 / M)
    z_kurt = kurt / np.sqrt(24.0 / M)
    corr = np.corrcoef(x, rowvar=False) if n > 1 else np.ones((1, 1))
    corr = np.atleast_2d(corr)
    with np.errstate(divide="ignore"):
        zc = np.arctanh(np.clip(corr, -1 + 1e-16, 1 - 1e-16)) * np.sqrt(max(M - 3, 1))
    np.fill_diagonal(zc, 0.0)
    ks = [stats.kstest(x[:, j], "norm") for j in range(n)]
    ks_d = np.array([r.statistic for r in ks])
    ks_p = np.array([r.pvalue for r in ks])
    failures = []
    for name, z in (("mean", z_mean), ("variance", z_var), ("skewness", z_skew),
                    ("kurtosis", z_kurt)):
        for j in np.flatnonzero(np.abs(z) > z_threshold):
            failures.append(f"{name} coordinate {j + 1} z={z[j]:.3g}")
    for i, j in zip(*np.triu_indices(n, 1)):
        if abs(zc[i, j]) > z_threshold:
            failures.append(f"correlation ({i + 1},{j + 1}) z={zc[i, j]:.3g}")
    for j in np.flatnonzero(ks_p < ks_alpha):
        failures.append(f"ks coordinate {j + 1} p={ks_p[j]:.3g}")
    return GaussianityReport(M, mean, var, skew, kurt, z_mean, z_var, z_skew, z_kurt, corr, zc,
                             ks_d, ks_p, z_threshold, not failures, failures)

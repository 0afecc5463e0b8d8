"""Direct transport: maps from unnormalized target log-densities."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag
from scipy.optimize import minimize

from .diagnostics import kl_variance_direct, log_normalizing_constant, monotonicity_violations
from .errors import CallbackFailure, NonMonotoneAtPoint
from .maps import LinearComponent, OptimizationReport, TriangularMap, make_map
from .optimize import OptimResult, lbfgs
from .quadrature import QuadratureRule, gauss_hermite_1d, sample_reference, tensorize

__all__ = [
    "DirectBuildConfig",
    "direct_objective",
    "build_direct",
    "estimate_log_normalizing_constant",
]

log = logging.getLogger(__name__)

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class DirectBuildConfig:
    """Settings for :func:`build_direct`.

    ``integration`` is ``"quadrature"`` (tensor Gauss-Hermite of ``order``
    points per axis) or ``"montecarlo"`` (``samples`` draws from ``seed``);
    an explicit ``rule`` overrides both. ``constraint`` is ``"monotone"``,
    ``"pointwise"`` or ``"auto"`` (monotone when the template is).
    """

    integration: str = "quadrature"
    order: int = 10
    samples: int = 1000
    seed: int = 0
    rule: QuadratureRule = None
    kind: str = "total"
    degree: int = 1
    quad_order: int = 32
    template: TriangularMap = None
    constraint: str = "auto"
    eps: float = 1e-6
    gtol: float = 1e-8
    maxiter: int = 500
    memory: int = 10
    c1: float = 1e-4
    init: object = "identity"
    check_points: int = 1000

    def __post_init__(self):
        if self.gtol <= 0 or self.maxiter <= 0 or self.eps <= 0:
            raise ValueError("tolerances and iteration limits must be positive")

    def make_rule(self, n):
        if self.rule is not None:
            return self.rule
        if self.integration == "quadrature":
            return tensorize(gauss_hermite_1d(self.order), n)
        if self.integration == "montecarlo":
            return sample_reference(self.samples, n, self.seed).as_rule()
        raise ValueError(f"unknown integration kind {self.integration!r}")

    def make_template(self, n):
        if self.template is not None:
            if self.template.n != n:
                raise ValueError("template dimension differs from target dimension")
            return self.template
        return make_map(n, self.kind, self.degree, quad_order=self.quad_order)


def direct_objective(tmap, target, rule, constraint="monotone", eps=1e-6):
    """Weighted SAA objective ``sum_i w_i [-log pi_bar(T(x_i)) - sum_k log d_k T^k(x_i)]``.

    Returns ``(value, flat coefficient gradient)``. In ``"pointwise"`` mode a
    partial below ``eps`` at any node yields ``+inf``; otherwise a non-positive
    partial raises :class:`NonMonotoneAtPoint`. Out-of-support nodes yield ``+inf``.
    """
    x, w = rule.nodes, rule.weights
    d = tmap.diag_jacobian(x)
    ncoef = sum(tmap.sizes)
    if constraint == "pointwise":
        if np.any(~(d > eps)):
            return np.inf, np.zeros(ncoef)
    else:
        bad = np.argwhere(~(d > 0))
        if bad.size:
            if tmap.monotone:
                # exp underflow of a monotone component acts like the barrier
                return np.inf, np.zeros(ncoef)
            i, k = bad[0]
            raise NonMonotoneAtPoint(int(k) + 1, x[i].copy(), float(d[i, k]))
    y = tmap(x)
    lp = target.logpdf(y)
    if np.any(np.isneginf(lp)):
        return np.inf, np.zeros(ncoef)
    value = float(w @ (-lp - np.sum(np.log(d), axis=1)))
    gy = target.grad(y, base=lp)
    gval = tmap.coefficient_gradient(x, "value")
    glog = tmap.coefficient_gradient(x, "logdiag")
    grads = [-(w * gy[:, k]) @ gval[k] - w @ glog[k] for k in range(tmap.n)]
    return value, np.concatenate(grads)


def estimate_log_normalizing_constant(tmap, target, rule):
    """``log`` of the normalizing constant of ``pi_bar`` (its integral) from a map."""
    return log_normalizing_constant(tmap, target, rule)


def _coefficient_scale(tmap, rule):
    x, w = rule.nodes, rule.weights / np.sum(rule.weights)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        gval = tmap.coefficient_gradient(x, "value")
        glog = tmap.coefficient_gradient(x, "logdiag")
    s = np.concatenate([np.sqrt(w @ a**2 + w @ b**2) for a, b in zip(gval, glog)])
    s[~np.isfinite(s) | (s < 1e-8)] = 1.0
    return s


def _gradient_polish(fg, u, f, g, steps=5, h=1e-6):
    """Newton steps on ``grad = 0`` with a finite-difference Hessian.

    Near a minimum the objective is flat to machine precision well before the
    coefficients are; the gradient still resolves them, so a few Newton steps
    on it settle the last digits.
    """
    for _ in range(steps):
        H = np.empty((u.size, u.size))
        for j in range(u.size):
            e = np.zeros_like(u)
            e[j] = h
            gp, gm = fg(u + e)[1], fg(u - e)[1]
            H[j] = (gp - gm) / (2 * h)
        H = 0.5 * (H + H.T)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        fn, gn = fg(u - step)
        if not (np.isfinite(fn) and fn <= f + 1e-12 * max(1.0, abs(f))
                and np.linalg.norm(gn) < np.linalg.norm(g)):
            break
        u, f, g = u - step, fn, gn
    return u, f, g


def _pointwise_slsqp(fg, u0, template, rule, scale, config):
    """Pointwise monotonicity as linear inequalities ``d_k T^k(x_i) >= eps``.

    For coefficient-linear maps the constraints are linear, so SLSQP handles
    them exactly; a bare L-BFGS line search stalls against the ``+inf`` wall
    at nodes with tiny weights.
    """
    A = block_diag(*[c.grad_diag(rule.nodes) for c in template.components]) / scale
    trace = []

    def fun(u):
        f, g = fg(u)
        if not np.isfinite(f):
            # SLSQP may probe just outside the feasible set
            return 1e300, np.zeros_like(u)
        trace.append(float(f))
        return f, g

    out = minimize(fun, u0, jac=True, method="SLSQP",
                   constraints=[{"type": "ineq", "fun": lambda u: A @ u - config.eps,
                                 "jac": lambda u: A}],
                   options={"maxiter": config.maxiter, "ftol": 1e-14})
    f, g = fg(out.x)
    if np.isfinite(f) and np.all(A @ out.x - config.eps > 1e-8):
        # interior solution: polish the gradient with unconstrained L-BFGS
        if np.linalg.norm(g) > config.gtol:
            polish = lbfgs(fg, out.x, gtol=config.gtol, maxiter=config.maxiter,
                           memory=config.memory, c1=config.c1)
            if polish.fun <= f:
                out.x, f, g = polish.x, polish.fun, polish.grad
                trace.extend(polish.trace[1:])
        u, f, g = _gradient_polish(fg, out.x, f, g)
        if np.all(A @ u - config.eps > 0):
            out.x = u
        else:
            f, g = fg(out.x)
    # stationarity of the Lagrangian is what SLSQP certifies; report the
    # objective gradient only when no constraint is active
    active = np.any(A @ out.x - config.eps < 1e-8)
    converged = bool(out.success and np.isfinite(f))
    msg = f"SLSQP: {out.message}" + ("; constraints active" if active else "")
    return OptimResult(out.x, float(f), g, int(out.nit), converged, msg, trace, int(out.nfev))


def build_direct(target, config=None, **overrides):
    """Minimize the direct objective jointly over all components with L-BFGS.

    Returns ``(map, OptimizationReport)``; non-convergence is flagged in the
    report rather than raised.
    """
    if config is None:
        config = DirectBuildConfig(**overrides)
    elif overrides:
        config = DirectBuildConfig(**{**config.__dict__, **overrides})
    n = target.dim
    rule = config.make_rule(n)
    template = config.make_template(n)
    if isinstance(config.init, str):
        if config.init != "identity":
            raise ValueError(f"unknown initialization {config.init!r}")
        x0 = template.flat_coefficients()
    else:
        x0 = np.asarray(config.init, dtype=float)
    constraint = config.constraint
    if constraint == "auto":
        constraint = "monotone" if template.monotone else "pointwise"

    # optimize in rescaled coordinates u = c * scale so that every basis term
    # has unit weighted RMS at the nodes; high-degree Hermite terms otherwise
    # leave the problem badly conditioned
    scale = _coefficient_scale(template, rule)

    def fg(u):
        c = u / scale
        try:
            f, g = direct_objective(template.with_coefficients(c), target, rule,
                                    constraint, config.eps)
        except FloatingPointError:
            return np.inf, np.zeros_like(c)
        return f, g / scale

    with np.errstate(over="ignore", under="ignore"):
        f0, _ = fg(x0 * scale)
        if not np.isfinite(f0):
            raise ValueError("initial map is infeasible at the integration nodes")
        linear = all(isinstance(c, LinearComponent) for c in template.components)
        if constraint == "pointwise" and linear:
            res = _pointwise_slsqp(fg, x0 * scale, template, rule, scale, config)
        else:
            res = lbfgs(fg, x0 * scale, gtol=config.gtol, maxiter=config.maxiter,
                        memory=config.memory, c1=config.c1)
    res.x = res.x / scale
    res.grad = res.grad * scale
    tmap = template.with_coefficients(res.x)
    if not res.converged:
        log.warning("direct build did not converge: %s (|g| = %.3e)", res.message, res.grad_norm)
    check = np.vstack([rule.nodes,
                       sample_reference(config.check_points, n, config.seed + 1).points])
    violations = monotonicity_violations(tmap, check)
    try:
        kl = kl_variance_direct(tmap, target, rule)
        logz = estimate_log_normalizing_constant(tmap, target, rule)
    except (NonMonotoneAtPoint, CallbackFailure):
        kl, logz = np.nan, np.nan
    report = OptimizationReport(
        objective=res.fun, gradient_norm=res.grad_norm, iterations=res.iterations,
        converged=res.converged, kl_variance_estimate=kl, log_normalizing_constant=logz,
        monotonicity_violations=violations, n_nodes=len(rule), message=res.message,
        trace=res.trace)
    return tmap, report

"""Unconstrained minimizers used by the map builders.

Infeasible points are signalled by an objective value of ``+inf``; the
backtracking line search simply keeps halving the step until it lands back in
the feasible region.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = ["OptimResult", "lbfgs", "newton"]


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    converged: bool
    message: str
    trace: list = field(default_factory=list)
    n_evals: int = 0

    @property
    def grad_norm(self):
        return float(np.linalg.norm(self.grad))


def _backtrack(fg, x, f, g, p, c1, max_halvings):
    slope = float(g @ p)
    alpha = 1.0
    evals = 0
    for _ in range(max_halvings):
        xn = x + alpha * p
        fn, gn = fg(xn)
        evals += 1
        if np.isfinite(fn) and fn <= f + c1 * alpha * slope:
            return alpha, xn, fn, gn, evals
        alpha *= 0.5
    return 0.0, x, f, g, evals


def lbfgs(fg, x0, gtol=1e-8, maxiter=500, memory=10, c1=1e-4, ftol=1e-15,
          max_halvings=60, callback=None):
    """Limited-memory BFGS with Armijo backtracking (step halving).

    ``fg(x)`` returns ``(f, grad)``. Stops when ``|grad| < gtol``, when the
    objective stalls (relative change below ``ftol`` on two consecutive
    iterations), or after ``maxiter`` iterations.
    """
    x = np.array(x0, dtype=float)
    f, g = fg(x)
    if not np.isfinite(f):
        raise ValueError("initial point is infeasible (objective is not finite)")
    hist = deque(maxlen=memory)
    trace = [float(f)]
    evals = 1
    stalls = 0
    message = "maximum iterations reached"
    converged = False
    it = 0
    for it in range(1, maxiter + 1):
        if np.linalg.norm(g) < gtol:
            converged, message, it = True, "gradient norm below tolerance", it - 1
            break
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(hist):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if hist:
            s, y, _ = hist[-1]
            q *= (s @ y) / (y @ y)
        else:
            q *= min(1.0, 1.0 / max(np.linalg.norm(g), 1e-300))
        for (s, y, rho), a in zip(hist, reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        p = -q
        if g @ p >= 0:
            hist.clear()
            p = -g * min(1.0, 1.0 / np.linalg.norm(g))
        alpha, xn, fn, gn, ne = _backtrack(fg, x, f, g, p, c1, max_halvings)
        evals += ne
        if alpha == 0.0:
            if hist:
                hist.clear()
                continue
            message = "line search failed to decrease the objective"
            converged = bool(np.linalg.norm(g) < np.sqrt(gtol))
            break
        s, y = xn - x, gn - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            hist.append((s, y, 1.0 / sy))
        stalled = abs(f - fn) <= ftol * max(1.0, abs(fn))
        x, f, g = xn, fn, gn
        trace.append(float(f))
        if callback is not None:
            callback(x, f, g)
        stalls = stalls + 1 if stalled else 0
        if stalls >= 2:
            converged, message = True, "objective stalled at machine precision"
            break
    else:
        if np.linalg.norm(g) < gtol:
            converged, message = True, "gradient norm below tolerance"
    return OptimResult(x, float(f), g, it, converged, message, trace, evals)


def newton(fgh, x0, gtol=1e-10, maxiter=100, c1=1e-4, max_halvings=60):
    """Damped Newton for smooth convex objectives; ``fgh(x)`` returns ``(f, g, H)``.

    Stops on ``|grad| < gtol`` or once the Newton decrement ``-g.p`` falls to
    round-off relative to ``|f|``.
    """
    x = np.array(x0, dtype=float)
    f, g, H = fgh(x)
    if not np.isfinite(f):
        raise ValueError("initial point is infeasible (objective is not finite)")
    trace = [float(f)]
    evals = 1
    converged, message = False, "maximum iterations reached"

    def fg(z):
        fz, gz, _ = fgh(z)
        return fz, gz

    it = 0
    for it in range(1, maxiter + 1):
        if np.linalg.norm(g) < gtol:
            converged, message, it = True, "gradient norm below tolerance", it - 1
            break
        try:
            Lc = np.linalg.cholesky(H)
            p = -np.linalg.solve(Lc.T, np.linalg.solve(Lc, g))
        except np.linalg.LinAlgError:
            # indefinite or singular Hessian: shift until positive definite
            lam = 1e-10 * max(np.trace(H) / len(g), 1.0)
            while True:
                try:
                    Lc = np.linalg.cholesky(H + lam * np.eye(len(g)))
                    break
                except np.linalg.LinAlgError:
                    lam *= 10
            p = -np.linalg.solve(Lc.T, np.linalg.solve(Lc, g))
        if -(g @ p) < 4 * np.finfo(float).eps * max(1.0, abs(f)):
            # Newton decrement at round-off level: no further progress possible
            converged, message, it = True, "Newton decrement at machine precision", it - 1
            break
        alpha, xn, fn, _, ne = _backtrack(fg, x, f, g, p, c1, max_halvings)
        evals += ne
        if alpha == 0.0:
            message = "line search failed to decrease the objective"
            converged = bool(np.linalg.norm(g) < np.sqrt(gtol))
            break
        x = xn
        f, g, H = fgh(x)
        evals += 1
        trace.append(float(f))
    else:
        if np.linalg.norm(g) < gtol:
            converged, message = True, "gradient norm below tolerance"
    return OptimResult(x, float(f), g, it, converged, message, trace, evals)

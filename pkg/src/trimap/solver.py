"""Pointwise inversion of monotone triangular maps."""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import BracketFailure, NonMonotoneAtPoint
from .quadrature import Provenance, SampleSet

__all__ = ["InversionResult", "invert", "invert_at", "push_inverse"]

log = logging.getLogger(__name__)


@dataclass
class InversionResult:
    points: np.ndarray
    residuals: np.ndarray
    failed: np.ndarray

    @property
    def ok(self):
        return self.failed.size == 0


def _solve_coordinate(tmap, k, Y, r, tol, center, width, max_expand, maxiter):
    """Solve ``S^k(Y[:, :k-1], w) = r`` for every row; returns (w, failed mask)."""
    M = Y.shape[0]
    work = Y.copy()

    def f(idx, w):
        work[idx, k - 1] = w
        with np.errstate(over="ignore", invalid="ignore"):
            v = tmap.evaluate_component(k, work[idx, :k]) - r[idx]
        # overflow far out in the tails: the sign is known from monotonicity
        nan = np.isnan(v)
        if nan.any():
            v[nan] = np.where(w[nan] > c[idx][nan], np.inf, -np.inf)
        return v

    def df(idx, w):
        work[idx, k - 1] = w
        with np.errstate(over="ignore", invalid="ignore"):
            return tmap.component_diag(k, work[idx, :k])

    allidx = np.arange(M)
    c = np.broadcast_to(np.asarray(center, dtype=float), (M,)).copy()
    lo = c - width
    hi = c + width
    flo = f(allidx, lo)
    fhi = f(allidx, hi)
    step = width
    for _ in range(max_expand):
        need_lo = flo > 0
        need_hi = fhi < 0
        if not (need_lo.any() or need_hi.any()):
            break
        step *= 2.0
        if need_lo.any():
            i = allidx[need_lo]
            # the old lower end becomes an upper bound
            hi[i] = np.minimum(hi[i], lo[i])
            fhi[i] = np.where(hi[i] == lo[i], flo[i], fhi[i])
            lo[i] = c[i] - step
            flo[i] = f(i, lo[i])
        if need_hi.any():
            i = allidx[need_hi]
            lo[i] = np.maximum(lo[i], hi[i])
            flo[i] = np.where(lo[i] == hi[i], fhi[i], flo[i])
            hi[i] = c[i] + step
            fhi[i] = f(i, hi[i])
    failed = (flo > 0) | (fhi < 0)
    w = np.where(failed, c, 0.5 * (lo + hi))
    # exact hits at the bracket ends
    w = np.where(flo == 0, lo, w)
    w = np.where(fhi == 0, hi, w)
    active = ~failed & (flo != 0) & (fhi != 0)
    for _ in range(maxiter):
        idx = allidx[active]
        if idx.size == 0:
            break
        fw = f(idx, w[idx])
        dw = df(idx, w[idx])
        neg = fw < 0
        lo[idx[neg]] = w[idx[neg]]
        hi[idx[~neg]] = w[idx[~neg]]
        done = (np.abs(fw) <= 0.01 * tol) | (hi[idx] - lo[idx] <= 4e-16 * (1 + np.abs(w[idx])))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            wn = w[idx] - fw / dw
        bad = ~(dw > 0) | ~(wn > lo[idx]) | ~(wn < hi[idx])
        # fall back to bisection when Newton leaves the bracket
        wn = np.where(bad, 0.5 * (lo[idx] + hi[idx]), wn)
        keep = ~done
        w[idx[keep]] = wn[keep]
        active[idx[done]] = False
    return w, failed


def invert(tmap, R, tol=1e-10, prefix=None, guess=None, max_expand=40, maxiter=200,
           newton_steps=5):
    """Solve ``tmap(y) = r`` for each row of ``R`` by forward substitution.

    Coordinates are found one at a time by bracketing plus safeguarded
    Newton/bisection, then up to ``newton_steps`` full Newton corrections
    (accepted only when they shrink the residual). ``prefix`` fixes the first
    coordinates of every solution to the given values. Points that cannot be
    bracketed or end above ``tol`` are listed in ``failed``.
    """
    R = np.atleast_2d(np.asarray(R, dtype=float))
    M, n = R.shape
    if n != tmap.n:
        raise ValueError(f"map has dimension {tmap.n}, right-hand sides have {n}")
    if not np.all(np.isfinite(R)):
        raise ValueError("non-finite right-hand side")
    Y = np.zeros((M, n))
    start = 0
    if prefix is not None:
        prefix = np.atleast_2d(np.asarray(prefix, dtype=float))
        start = prefix.shape[1]
        Y[:, :start] = prefix
    failed = np.zeros(M, dtype=bool)
    for k in range(start + 1, n + 1):
        if guess is not None:
            center = np.atleast_2d(guess)[:, k - 1]
        elif tmap.has_premap:
            center = tmap.shift[k - 1]
        else:
            center = 0.0
        width = tmap.scale[k - 1] if tmap.has_premap else 1.0
        w, fk = _solve_coordinate(tmap, k, Y, R[:, k - 1], tol, center, width,
                                  max_expand, maxiter)
        Y[:, k - 1] = w
        failed |= fk
    resid = _residual(tmap, Y, R, start)
    for _ in range(newton_steps):
        todo = ~failed & (resid > 0.01 * tol)
        if not todo.any():
            break
        idx = np.flatnonzero(todo)
        F = tmap(Y[idx]) - R[idx]
        J = tmap.jacobian(Y[idx])
        F[:, :start] = 0.0
        sub = J[:, start:, start:]
        try:
            delta = np.linalg.solve(sub, F[:, start:, None])[..., 0]
        except np.linalg.LinAlgError:
            break
        trial = Y[idx].copy()
        trial[:, start:] -= delta
        ok = np.all(np.isfinite(trial), axis=1)
        new_res = np.full(len(idx), np.inf)
        new_res[ok] = _residual(tmap, trial[ok], R[idx][ok], start)
        better = new_res < resid[idx]
        Y[idx[better]] = trial[better]
        resid[idx[better]] = new_res[better]
        if not better.any():
            break
    failed |= ~(resid <= tol)
    return InversionResult(Y, resid, np.flatnonzero(failed))


def _residual(tmap, Y, R, start=0):
    return np.max(np.abs(tmap(Y)[:, start:] - R[:, start:]), axis=1) if start < R.shape[1] \
        else np.zeros(Y.shape[0])


def invert_at(tmap, r, tol=1e-10, **kwargs):
    """Single point ``y`` with ``|tmap(y) - r|_inf <= tol``."""
    r = np.asarray(r, dtype=float)
    res = invert(tmap, r[None, :], tol, **kwargs)
    if not res.ok:
        d = tmap.diag_jacobian(res.points)
        if np.any(~(d > 0)):
            k = int(np.argmax(~(d[0] > 0))) + 1
            raise NonMonotoneAtPoint(k, res.points[0], float(d[0, k - 1]))
        raise BracketFailure(f"could not invert map at r={r!r} (residual {res.residuals[0]:.3e})",
                             indices=[0])
    return res.points[0]


def push_inverse(tmap, samples, tol=1e-10, **kwargs):
    """Apply the inverse map to every point; failures are recorded, not raised."""
    pts = samples.points if isinstance(samples, SampleSet) else np.atleast_2d(samples)
    res = invert(tmap, pts, tol, **kwargs)
    if not res.ok:
        log.warning("inversion failed at %d of %d points", res.failed.size, len(pts))
    good = np.all(np.isfinite(res.points), axis=1)
    out = SampleSet(np.where(good[:, None], res.points, 0.0), Provenance.PUSHFORWARD,
                    seed=getattr(samples, "seed", None))
    out.meta["failed"] = res.failed
    out.meta["residuals"] = res.residuals
    return out

"""Unnormalized target log-densities."""

import shlex
import subprocess
import warnings

import numpy as np

from .errors import CallbackFailure

__all__ = [
    "TargetDensity",
    "GaussianTarget",
    "BananaTarget",
    "SubprocessTarget",
    "finite_difference_gradient",
]


def finite_difference_gradient(logpdf, y, base=None):
    """One-sided differences with step ``1e-5 (1 + |y_j|)``."""
    y = np.atleast_2d(y)
    if base is None:
        base = logpdf(y)
    grad = np.empty_like(y)
    for j in range(y.shape[1]):
        h = 1e-5 * (1.0 + np.abs(y[:, j]))
        yp = y.copy()
        yp[:, j] += h
        grad[:, j] = (logpdf(yp) - base) / h
    return grad


class TargetDensity:
    """Wraps a vectorized callback ``logpdf(Y) -> (M,)`` and optional ``grad(Y) -> (M, n)``.

    ``-inf`` marks points outside the support. NaN is a callback failure.
    """

    def __init__(self, dim, logpdf, grad=None, name=None):
        self.dim = int(dim)
        self._logpdf = logpdf
        self._grad = grad
        self.name = name or getattr(logpdf, "__name__", "target")
        self._warned = False

    @property
    def has_gradient(self):
        return self._grad is not None

    def _check(self, y):
        y = np.asarray(y, dtype=float)
        single = y.ndim == 1
        y = np.atleast_2d(y)
        if y.shape[1] != self.dim:
            raise ValueError(f"target has dimension {self.dim}, got points of dimension {y.shape[1]}")
        return y, single

    def logpdf(self, y):
        y, single = self._check(y)
        try:
            v = np.asarray(self._logpdf(y), dtype=float).reshape(y.shape[0])
        except CallbackFailure:
            raise
        except Exception as exc:
            raise CallbackFailure(f"log-density callback raised {exc!r}") from exc
        if np.any(np.isnan(v)) or np.any(v == np.inf):
            raise CallbackFailure("log-density callback returned NaN or +inf")
        return v[0] if single else v

    __call__ = logpdf

    def grad(self, y, base=None):
        y, single = self._check(y)
        if self._grad is None:
            if not self._warned:
                warnings.warn(f"target {self.name!r} has no gradient; using finite differences",
                              stacklevel=2)
                self._warned = True
            g = finite_difference_gradient(self.logpdf, y, base)
        else:
            g = np.asarray(self._grad(y), dtype=float).reshape(y.shape)
        if np.any(np.isnan(g)):
            raise CallbackFailure("log-density gradient is NaN")
        return g[0] if single else g

    def scaled(self, factor):
        """The same target multiplied by a positive constant."""
        shift = np.log(factor)
        return TargetDensity(self.dim, lambda y: self._logpdf(y) + shift, self._grad,
                             name=f"{self.name}*{factor:g}")


class GaussianTarget(TargetDensity):
    """``N(mean, cov)`` with an optional additive log-constant (unnormalized by default)."""

    def __init__(self, mean, cov, log_scale=0.0, normalized=False):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        n = self.mean.size
        self.cov = np.asarray(cov, dtype=float).reshape(n, n)
        self.chol = np.linalg.cholesky(self.cov)
        self.prec = np.linalg.inv(self.cov)
        const = log_scale
        if normalized:
            const -= 0.5 * n * np.log(2 * np.pi) + np.sum(np.log(np.diag(self.chol)))
        self.log_const = const
        super().__init__(n, self._lp, self._lg, name="gaussian")

    @property
    def log_normalizer(self):
        """``log`` of the integral of the (possibly unnormalized) density."""
        n = self.dim
        return (self.log_const + 0.5 * n * np.log(2 * np.pi)
                + np.sum(np.log(np.diag(self.chol))))

    def _lp(self, y):
        r = y - self.mean
        return -0.5 * np.einsum("ij,jk,ik->i", r, self.prec, r) + self.log_const

    def _lg(self, y):
        return -(y - self.mean) @ self.prec


class BananaTarget(TargetDensity):
    """Gaussian in ``(y_1, y_2 - b (y_1^2 - 1))``; log-density of a curved 2D target."""

    def __init__(self, b=1.0, sigma=1.0):
        self.b = float(b)
        self.sigma = float(sigma)
        super().__init__(2, self._lp, self._lg, name="banana")

    def _lp(self, y):
        u = y[:, 1] - self.b * (y[:, 0] ** 2 - 1.0)
        return -0.5 * y[:, 0] ** 2 - 0.5 * u**2 / self.sigma**2

    def _lg(self, y):
        u = y[:, 1] - self.b * (y[:, 0] ** 2 - 1.0)
        g1 = -y[:, 0] + u / self.sigma**2 * 2 * self.b * y[:, 0]
        g2 = -u / self.sigma**2
        return np.column_stack([g1, g2])


class SubprocessTarget(TargetDensity):
    """Log-density served by a child process over a newline-delimited text pipe.

    For each point the parent writes one line of space-separated decimals; the
    child answers with one line holding the log-density (``-inf`` allowed).
    """

    def __init__(self, command, dim):
        self.command = command
        self._proc = None
        super().__init__(dim, self._lp, None, name=f"cmd:{command}")

    def _ensure(self):
        if self._proc is None or self._proc.poll() is not None:
            args = shlex.split(self.command) if isinstance(self.command, str) else self.command
            self._proc = subprocess.Popen(args, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                          text=True, bufsize=1)
        return self._proc

    def _lp(self, y):
        proc = self._ensure()
        out = np.empty(y.shape[0])
        for i, row in enumerate(y):
            proc.stdin.write(" ".join(f"{v:.17g}" for v in row) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
            if not line:
                raise CallbackFailure("log-density subprocess closed its output")
            try:
                out[i] = float(line.strip())
            except ValueError as exc:
                raise CallbackFailure(f"bad reply from subprocess: {line!r}") from exc
        return out

    def close(self):
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait(timeout=5)
            self._proc = None

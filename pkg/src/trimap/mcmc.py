"""Adaptive Metropolis reference sampler and map-preconditioned sampling."""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import TrimapError
from .quadrature import Provenance, SampleSet

__all__ = [
    "AdaptConfig",
    "MCMCResult",
    "adaptive_metropolis",
    "effective_sample_size",
    "moments",
    "batch_moment_errors",
    "preconditioned_sample",
]

log = logging.getLogger(__name__)


@dataclass
class AdaptConfig:
    """Haario-style adaptation of a Gaussian random-walk proposal.

    Until ``start`` steps the proposal covariance is ``initial_cov``; afterwards
    it is ``scale * (Cov(chain) + eps I)`` refreshed every ``interval`` steps,
    with ``scale`` defaulting to ``2.38^2 / n``. Adaptation stops after
    ``stop`` steps (``None`` keeps adapting). With ``target_acceptance`` set,
    a Robbins-Monro factor on the scale steers the running acceptance rate.
    """

    initial_cov: object = None
    start: int = 1000
    interval: int = 100
    eps: float = 1e-8
    scale: float = None
    stop: int = None
    target_acceptance: float = None


@dataclass
class MCMCResult:
    chain: np.ndarray
    logdensity: np.ndarray
    acceptance_rate: float
    ess: np.ndarray
    proposal_cov: np.ndarray
    meta: dict = field(default_factory=dict)


def adaptive_metropolis(logdensity, x0, steps, burn_in=0, seed=0, adapt=None, thin=1):
    """Run an adaptive random-walk Metropolis chain.

    ``logdensity`` maps a point of shape ``(n,)`` to a float (``-inf`` outside
    the support). Returns the post-burn-in chain with its acceptance rate and
    per-coordinate effective sample size.
    """
    adapt = adapt or AdaptConfig()
    x = np.array(x0, dtype=float).ravel()
    n = x.size
    lp = float(logdensity(x))
    if not np.isfinite(lp):
        raise TrimapError("log-density is not finite at the starting point")
    scale = adapt.scale if adapt.scale is not None else 2.38**2 / n
    cov0 = (np.eye(n) * 0.1 if adapt.initial_cov is None
            else np.atleast_2d(np.asarray(adapt.initial_cov, dtype=float)))
    chol = np.linalg.cholesky(cov0)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    keep = (steps - burn_in + thin - 1) // thin if steps > burn_in else 0
    chain = np.empty((keep, n))
    lps = np.empty(keep)
    mean = x.copy()
    m2 = np.zeros((n, n))
    count = 1
    log_factor = 0.0
    accepted = 0
    accepted_kept = 0
    block = 8192
    j = 0
    for t in range(steps):
        if t % block == 0:
            noise = rng.standard_normal((block, n))
            logu = np.log(rng.random(block))
        prop = x + chol @ noise[t % block]
        lq = float(logdensity(prop))
        acc = lq - lp >= logu[t % block]
        if acc:
            x, lp = prop, lq
            accepted += 1
            if t >= burn_in:
                accepted_kept += 1
        adapting = adapt.stop is None or t < adapt.stop
        if adapting:
            # Welford update of the running mean and scatter matrix
            count += 1
            delta = x - mean
            mean += delta / count
            m2 += np.outer(delta, x - mean)
            if adapt.target_acceptance is not None and t >= adapt.start:
                log_factor += (float(acc) - adapt.target_acceptance) / np.sqrt(t + 1)
            if t >= adapt.start and (t + 1) % adapt.interval == 0:
                cov = m2 / (count - 1) + adapt.eps * np.eye(n)
                try:
                    chol = np.linalg.cholesky(scale * np.exp(log_factor) * cov)
                except np.linalg.LinAlgError:
                    pass
        if t >= burn_in and (t - burn_in) % thin == 0:
            chain[j] = x
            lps[j] = lp
            j += 1
    rate = accepted_kept / max(steps - burn_in, 1)
    if rate < 0.01:
        log.warning("acceptance rate %.4f: the chain looks stuck", rate)
    ess = effective_sample_size(chain) if keep > 3 else np.zeros(n)
    return MCMCResult(chain, lps, rate, ess, chol @ chol.T,
                      meta={"total_acceptance": accepted / max(steps, 1)})


def _autocorr(x):
    n = len(x)
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    return acov / acov[0] if acov[0] > 0 else np.zeros(n)


def effective_sample_size(chain):
    """Per-coordinate ESS from Geyer's initial monotone sequence estimator."""
    chain = np.atleast_2d(np.asarray(chain, dtype=float))
    if chain.shape[0] == 1:
        chain = chain.T
    N = chain.shape[0]
    out = np.empty(chain.shape[1])
    for j in range(chain.shape[1]):
        rho = _autocorr(chain[:, j])
        if not rho.any():
            out[j] = N
            continue
        m = len(rho) // 2
        pairs = rho[: 2 * m : 2] + rho[1 : 2 * m : 2]
        neg = np.flatnonzero(pairs <= 0)
        pairs = pairs[: neg[0]] if neg.size else pairs
        pairs = np.minimum.accumulate(pairs)
        tau = -1.0 + 2.0 * pairs.sum()
        out[j] = N / max(tau, 1e-12)
    return out


def moments(x):
    """Mean, variance, skewness and (non-excess) kurtosis per column."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return (x.mean(axis=0), x.var(axis=0), stats.skew(x, axis=0),
            stats.kurtosis(x, axis=0, fisher=False))


def batch_moment_errors(chain, n_batches=30):
    """Batch-means standard errors of the four moments of a correlated chain."""
    chain = np.atleast_2d(np.asarray(chain, dtype=float))
    size = chain.shape[0] // n_batches
    per = np.array([np.stack(moments(chain[b * size:(b + 1) * size])) for b in range(n_batches)])
    return per.std(axis=0, ddof=1) / np.sqrt(n_batches)


def preconditioned_sample(tmap, target, steps, seed=0, burn_in=0, adapt=None, x0=None):
    """Sample the target exactly by running MCMC on the map's pullback density.

    Returns a :class:`SampleSet` of pushed-forward chain states; the raw
    reference-space chain is kept in ``meta["mcmc"]``.
    """
    from .diagnostics import pullback_logdensity
    from .errors import NonMonotoneAtPoint

    def logp(x):
        try:
            return float(pullback_logdensity(tmap, target, x))
        except NonMonotoneAtPoint:
            # outside the region where the approximate map is invertible
            return -np.inf

    x0 = np.zeros(tmap.n) if x0 is None else x0
    adapt = adapt or AdaptConfig(initial_cov=np.eye(tmap.n) * 2.38**2 / tmap.n)
    res = adaptive_metropolis(logp, x0, steps, burn_in, seed, adapt)
    pushed = tmap(res.chain) if len(res.chain) else res.chain
    return SampleSet(pushed, Provenance.PUSHFORWARD, seed=int(seed), meta={"mcmc": res})

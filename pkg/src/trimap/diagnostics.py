"""Quality measures for approximate transport maps."""

import warnings

import numpy as np

from .quadrature import QuadratureRule, SampleSet

__all__ = [
    "reference_logpdf",
    "kl_variance_direct",
    "kl_variance_inverse",
    "log_normalizing_constant",
    "bias_bound",
    "pullback_logdensity",
    "monotonicity_violations",
]

_LOG_2PI = np.log(2.0 * np.pi)


def reference_logpdf(x):
    """Standard normal log-density, summed over the last axis."""
    x = np.asarray(x, dtype=float)
    return -0.5 * np.sum(x**2, axis=-1) - 0.5 * x.shape[-1] * _LOG_2PI


def _as_rule(rule_or_samples):
    if isinstance(rule_or_samples, QuadratureRule):
        return rule_or_samples
    if isinstance(rule_or_samples, SampleSet):
        return rule_or_samples.as_rule()
    pts = np.atleast_2d(np.asarray(rule_or_samples, dtype=float))
    return QuadratureRule(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))


def _weighted_var(values, weights):
    mean = weights @ values
    return float(weights @ (values - mean) ** 2)


def _direct_log_ratio(tmap, target, x):
    # log eta(x) - log pi_bar(T(x)) - log det grad T(x)
    return reference_logpdf(x) - target.logpdf(tmap(x)) - tmap.log_det_jacobian(x)


def kl_variance_direct(tmap, target, rule):
    """Half the reference-weighted variance of ``log eta - log (T pullback of pi_bar)``.

    A normalization-free second-order estimate of ``KL(T_# eta || pi)``.
    """
    rule = _as_rule(rule)
    r = _direct_log_ratio(tmap, target, rule.nodes)
    return 0.5 * _weighted_var(r, rule.weights)


def log_normalizing_constant(tmap, target, rule):
    """Estimate ``log int pi_bar`` as ``E_eta[log pi_bar(T) + log det grad T - log eta]``."""
    rule = _as_rule(rule)
    return -float(rule.weights @ _direct_log_ratio(tmap, target, rule.nodes))


def kl_variance_inverse(smap, samples, target_logpdf):
    """Half the sample variance of ``log pi_bar(y) - log eta(S(y)) - log det grad S(y)``."""
    y = samples.points if isinstance(samples, SampleSet) else np.atleast_2d(samples)
    if y.shape[0] == 1:
        warnings.warn("variance of a single sample is zero; the estimate is meaningless",
                      stacklevel=2)
        return 0.0
    lp = target_logpdf(y)
    r = lp - reference_logpdf(smap(y)) - smap.log_det_jacobian(y)
    return 0.5 * float(np.var(r))


def pullback_logdensity(tmap, target, x):
    """Unnormalized log of ``pi_bar(T(x)) |det grad T(x)|``."""
    return target.logpdf(tmap(x)) + tmap.log_det_jacobian(x)


def monotonicity_violations(tmap, points):
    """Number of points where some diagonal partial is not positive."""
    d = tmap.diag_jacobian(np.atleast_2d(points))
    return int(np.sum(np.any(~(d > 0), axis=1)))


def bias_bound(tmap, target, g, rule, target_second_moment=None, kl=None):
    """Upper bound on ``|E_pi[g] - E_{T_# eta}[g]|`` from the KL variance estimate.

    ``C = sqrt(2) (E_pi|g|^2 + E_approx|g|^2)^(1/2)``. When
    ``target_second_moment`` (``E_pi|g|^2``) is not supplied it is replaced by
    the pushforward estimate and a warning is issued.
    """
    rule = _as_rule(rule)
    y = tmap(rule.nodes)
    gv = np.asarray(g(y), dtype=float).reshape(len(y), -1)
    approx_m2 = float(rule.weights @ np.sum(gv**2, axis=1))
    if target_second_moment is None:
        warnings.warn("E_pi[|g|^2] unknown; using the pushforward estimate as surrogate",
                      stacklevel=2)
        target_second_moment = approx_m2
    if kl is None:
        kl = kl_variance_direct(tmap, target, rule)
    const = np.sqrt(2.0) * np.sqrt(target_second_moment + approx_m2)
    return float(const * np.sqrt(max(kl, 0.0)))

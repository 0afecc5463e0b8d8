"""Triangular transport maps for Bayesian inference.

Build monotone lower-triangular maps between a standard normal reference and
a target distribution, either from an unnormalized target density (direct
maps) or from target samples (inverse maps), and use them for sampling,
conditioning and MCMC preconditioning.
"""

__version__ = "0.1.0"

from .basis import IndexKind, MultiIndexSet, build_multi_index_set, hermite_eval
from .conditioning import ConditionalMap, condition, sample_conditional
from .diagnostics import (
    bias_bound,
    kl_variance_direct,
    kl_variance_inverse,
    log_normalizing_constant,
    monotonicity_violations,
    pullback_logdensity,
)
from .direct import DirectBuildConfig, build_direct, direct_objective, estimate_log_normalizing_constant
from .errors import (
    BracketFailure,
    CallbackFailure,
    FileFormatError,
    NonConvergence,
    NonMonotoneAtPoint,
    TrimapError,
)
from .inverse import build_inverse, gaussianity_check, regress_direct_from_pairs
from .io import load_map, load_samples, save_map, save_samples
from .maps import (
    Direction,
    IntegratedExponentialComponent,
    OptimizationReport,
    PolynomialComponent,
    RBFComponent,
    TriangularMap,
    identity_map,
    linear_map,
    make_map,
)
from .mcmc import AdaptConfig, adaptive_metropolis, effective_sample_size, preconditioned_sample
from .quadrature import (
    Provenance,
    QuadratureRule,
    SampleSet,
    gauss_hermite_1d,
    reference_normals,
    sample_reference,
    tensorize,
)
from .solver import invert, invert_at, push_inverse
from .targets import BananaTarget, GaussianTarget, SubprocessTarget, TargetDensity

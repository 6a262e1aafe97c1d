"""Tauberian calculus for regularly log-periodic functions.

Function classes (core), the operators linking tails to Laplace-Stieltjes
transforms (operators, laplace), ratio-extrapolation estimators and
equivalence verifiers (tauberian), and four executable probability models
(models): St. Petersburg, semistable laws, near-critical Galton-Watson,
and lattice smoothing transforms.
"""

from .core import (
    GeometricGrid,
    MembershipReport,
    PeriodicFn,
    QClassFn,
    RegLogPeriodic,
    SlowlyVaryingFn,
    check_class_membership,
    classify_regularity,
    compute_star_limits,
)
from .laplace import StieltjesMeasure, ls_transform, truncated_moment
from .operators import (
    OperatorConfig,
    OperatorDomainError,
    apply_A,
    apply_A_inv,
    apply_B,
    apply_B_inv,
    chain_p_from_q,
    chain_q_from_p,
)
from .tauberian import (
    EquivalenceReport,
    EstimatorConfig,
    TailEstimate,
    bd_equivalence_suite,
    estimate_tail_limit,
    estimate_transform_limit,
    fit_periodic,
    verify_karamata_suite,
    verify_monotone_density,
    verify_tauberian,
)

__version__ = "0.1.0"

__all__ = [
    "GeometricGrid",
    "MembershipReport",
    "PeriodicFn",
    "QClassFn",
    "RegLogPeriodic",
    "SlowlyVaryingFn",
    "check_class_membership",
    "classify_regularity",
    "compute_star_limits",
    "StieltjesMeasure",
    "ls_transform",
    "truncated_moment",
    "OperatorConfig",
    "OperatorDomainError",
    "apply_A",
    "apply_A_inv",
    "apply_B",
    "apply_B_inv",
    "chain_p_from_q",
    "chain_q_from_p",
    "EquivalenceReport",
    "EstimatorConfig",
    "TailEstimate",
    "bd_equivalence_suite",
    "estimate_tail_limit",
    "estimate_transform_limit",
    "fit_periodic",
    "verify_karamata_suite",
    "verify_monotone_density",
    "verify_tauberian",
    "__version__",
]

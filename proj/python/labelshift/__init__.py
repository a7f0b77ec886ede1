"""Label shift quantification: mixture-weight estimation on finite spaces.

Thin wrapper around the C++ extension; see the functions exported from
``labelshift._labelshift``.
"""

from labelshift._labelshift import (
    CERTIFICATE_THRESHOLD,
    DiscreteDistribution,
    NumericalError,
    ValidationError,
    certify,
    delta_star,
    estimate_bbse,
    estimate_grid_oracle,
    estimate_mle,
    estimate_mle_predictor,
    hellinger,
    hellinger_weights,
    psi,
    run_study,
    sample_target,
    simplex_project,
    t_statistic,
    theoretical_envelope,
    total_variation,
    upsilon,
)
from labelshift._labelshift import __version__

__all__ = [
    "CERTIFICATE_THRESHOLD",
    "DiscreteDistribution",
    "NumericalError",
    "ValidationError",
    "certify",
    "delta_star",
    "estimate_bbse",
    "estimate_grid_oracle",
    "estimate_mle",
    "estimate_mle_predictor",
    "hellinger",
    "hellinger_weights",
    "psi",
    "run_study",
    "sample_target",
    "simplex_project",
    "t_statistic",
    "theoretical_envelope",
    "total_variation",
    "upsilon",
    "__version__",
]

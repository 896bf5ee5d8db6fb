"""Sharp Bellman functions of dyadic harmonic analysis.

Numerical companions to four sharp inequalities: the Buckley square-function
estimate for A_infty weights, a two-weight Haar product sum, the integral
John--Nirenberg inequality on the BMO ball, and the dyadic maximal operator
on L^2.  The package ships the closed-form candidate surfaces, the dyadic
test-function machinery, extremal-function constructions, foliation tracing
for the degenerate-Hessian geometry, and independent verification oracles.
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    BMO,
    BellmanPoint,
    BoundaryClass,
    Buckley,
    Maximal,
    ProblemDomain,
    TwoWeight,
    classify_boundary,
    contains,
    segment_in_domain,
)
from .dyadic import (  # noqa: F401
    DyadicFunction,
    IntervalStats,
    ainf_ratio,
    averages,
    bmo_norm_sq,
    buckley_sum,
    cutoff,
    cutoff_identity_residual,
    dyadic_maximal,
    haar_coefficient,
    two_weight_sum,
)
from .candidates import (  # noqa: F401
    CandidateSurface,
    buckley_value,
    gradient,
    hessian,
    jn_g_ode_residual,
    jn_hessian_form,
    jn_value,
    maximal_value,
    maximal_value_extended,
    two_weight_value,
)

"""Privacy accounting for shuffled local randomizers.

Upper bounds come from a pair of "clone" distributions that dominate every
neighboring pair of shuffled outputs; lower bounds come from shuffled binary
randomized response.
"""

from .clones import (
    BUDGET_EXCEEDED,
    COMPLETE,
    REMAINDER_NEGLIGIBLE,
    DivergenceEstimate,
    SearchConfig,
    delta_exact_small,
    delta_upper,
    eps_upper,
    monotone_envelope,
    stripe_divergence,
)
from .closed_form import (
    EpsDelta,
    LocalPrivacy,
    SgdAccounting,
    approx_dp_bound,
    eps0_for_frequency,
    eps_closed_form,
    eps_generic_clones,
    eps_krr,
    gaussian_sigma,
    max_eps0,
    sgd_accounting,
)
from .dist import CloneInstance, binom_cdf, binom_sf, clone_joint_pmf, log_binom_pmf
from .errors import ApplicabilityError, ParameterDomainError
from .renyi import (
    RdpCurve,
    RdpValue,
    advanced_composition,
    compose_advanced_route,
    compose_rdp_route,
    default_alphas,
    rdp_clones,
    rdp_clones_curve,
    rdp_clones_exact_small,
    rdp_compose,
    rdp_lower_2rr,
    rdp_lower_2rr_curve,
    rdp_to_dp,
)
from .rr_lower import (
    RrCountPair,
    TailPoint,
    eps_lower_2rr,
    log_delta_grid,
    rr_delta_exact,
    tail_sweep,
    tail_transition,
)

__version__ = "0.1.0"

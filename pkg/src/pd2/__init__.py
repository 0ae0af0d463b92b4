"""Two-parameter Poisson-Dirichlet sampling, exact formulas and asymptotic checks."""

__version__ = "0.1.0"

from .special import QuadratureSpec, RngStream, log_gamma, tail_integral, log_tail_integral  # noqa: E402
from .sampler import (  # noqa: E402
    Params,
    GemSample,
    PdSample,
    SubordinatorDraw,
    WeightedEnsemble,
    constants,
    gem_sample,
    gem_tail_bound,
    rank_descending,
    stable_ranked_jumps,
    importance_ensemble,
    sample_pd_subordinator,
)
from .analytics import homozygosity, cdf_v1, log_sf_v1, estimate_g, joint_density, EmpiricalCdf  # noqa: E402

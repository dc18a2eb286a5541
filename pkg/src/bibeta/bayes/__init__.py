from .convergence import bulk_ess, split_rhat
from .fit import (
    HmcConfig,
    MOMENT_NAMES,
    PosteriorDraws,
    PpcReport,
    be1,
    be2,
    hmc_fit,
    moments_of_array,
    ppc,
    prior_predictive_correlation,
)
from .nuts import run_chain
from .posterior import AugmentedPosterior, AugmentedState, latent_bounds, log_augmented_posterior
from .priors import PriorSpec
from .sbc import SBCReport, rank_statistic, sbc, thin_to, uniformity_pvalues

__all__ = [
    "AugmentedPosterior",
    "AugmentedState",
    "HmcConfig",
    "MOMENT_NAMES",
    "PosteriorDraws",
    "PpcReport",
    "PriorSpec",
    "SBCReport",
    "be1",
    "be2",
    "bulk_ess",
    "hmc_fit",
    "latent_bounds",
    "log_augmented_posterior",
    "moments_of_array",
    "ppc",
    "prior_predictive_correlation",
    "rank_statistic",
    "run_chain",
    "sbc",
    "split_rhat",
    "thin_to",
    "uniformity_pvalues",
]

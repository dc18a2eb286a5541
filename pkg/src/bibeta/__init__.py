"""Four-parameter bivariate beta distribution toolkit.

Moment algebra, density and sampling for the Dirichlet-built bivariate beta,
four method-of-moments estimators with bootstrap intervals, latent-variable
posterior inference with a self-contained no-U-turn sampler, prior
elicitation, model-adequacy diagnostics, and a Monte Carlo study harness.
"""

from ._rng import DEFAULT_SEED, derive_seed, rng_from
from .core import (
    density,
    density_grid,
    is_density_defined,
    moments_of,
    rho_bounds,
    sample,
    solve_four_moments,
    solve_three_moments,
)
from .diagnostics import GnReport, MReport, gn_test, m_test
from .elicitation import ElicitationResult, beta_variance_from_quantile, elicit
from .errors import (
    BibetaError,
    ChainFailure,
    CholeskyFailure,
    DegenerateDenominator,
    DegenerateVariance,
    InfeasibleVariance,
    OptimizerFailure,
    QuadratureFailure,
    UndefinedDensity,
    ZeroVariance,
)
from .estimators import (
    BootstrapCI,
    EstimateReport,
    bootstrap_ci,
    empirical_moments,
    estimate,
    mm1,
    mm2,
    mm3,
    mm4,
)
from .types import AlphaParams, MomentSummary, PairedSample, RhoInterval, SolverOutcome

__version__ = "0.1.0"

__all__ = [
    "AlphaParams",
    "BibetaError",
    "BootstrapCI",
    "ChainFailure",
    "CholeskyFailure",
    "DEFAULT_SEED",
    "DegenerateDenominator",
    "DegenerateVariance",
    "ElicitationResult",
    "EstimateReport",
    "GnReport",
    "InfeasibleVariance",
    "MReport",
    "MomentSummary",
    "OptimizerFailure",
    "PairedSample",
    "QuadratureFailure",
    "RhoInterval",
    "SolverOutcome",
    "UndefinedDensity",
    "ZeroVariance",
    "beta_variance_from_quantile",
    "bootstrap_ci",
    "density",
    "density_grid",
    "derive_seed",
    "elicit",
    "empirical_moments",
    "estimate",
    "gn_test",
    "is_density_defined",
    "m_test",
    "mm1",
    "mm2",
    "mm3",
    "mm4",
    "moments_of",
    "rho_bounds",
    "rng_from",
    "sample",
    "solve_four_moments",
    "solve_three_moments",
]

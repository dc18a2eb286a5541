"""Exception hierarchy for domain and numerical failures.

Every error that maps to a statistical domain violation derives from
:class:`BibetaError`, so callers (and the CLI) can distinguish "the input is
outside the model's parameter space" (exit code 2) from plain usage errors
(exit code 1).
"""


class BibetaError(Exception):
    """Base class for all numerical-domain errors raised by this package."""


class InfeasibleVariance(BibetaError):
    """A variance is too large for its mean: v >= m(1-m), so no solution exists."""


class DegenerateDenominator(BibetaError):
    """The shared denominator of the three-moment solution is zero or negative."""


class UndefinedDensity(BibetaError):
    """The joint density does not exist at the requested point."""


class QuadratureFailure(BibetaError):
    """The adaptive quadrature could not reach the requested tolerance."""


class ZeroVariance(BibetaError):
    """A sample has zero variance in one coordinate; correlation is undefined."""


class OptimizerFailure(BibetaError):
    """No feasible point improved the objective after all restarts."""


class ChainFailure(BibetaError):
    """A sampler chain could not be initialized with finite energy."""


class DegenerateVariance(BibetaError):
    """The plug-in variance estimate of a test statistic is zero."""


class CholeskyFailure(BibetaError):
    """A covariance matrix is not symmetric positive definite."""

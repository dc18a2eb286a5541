"""Turn expert moment summaries into a concentration vector.

The strategy tries progressively weaker matching:

(a) if the full four-moment solution lies in the parameter space, use it;
(b) otherwise use the three-moment estimate (means and correlation exact,
    variances least-squares) when it is strictly positive;
(c) otherwise fall back to the mean-exact optimizer (``means-first``) or the
    all-moment least squares (``balanced``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import beta as beta_dist

from .core import moments_of, rho_bounds, solve_four_moments
from .errors import InfeasibleVariance
from .estimators import POSITIVITY_FLOOR, mm2, mm3, mm4
from .types import AlphaParams, MomentSummary

PATH_EXACT = "exact-four-moment"
PATH_MM2 = "three-moment-mm2"
PATH_MM3 = "mm3-fallback"
PATH_MM4 = "mm4-fallback"

PREFERENCE_MEANS_FIRST = "means-first"
PREFERENCE_BALANCED = "balanced"

# Elicited numbers are exact user inputs, so equality of the two variance
# ratios is tested tightly.
_RATIO_RTOL = 1e-9


@dataclass(frozen=True)
class ElicitationResult:
    alpha: AlphaParams
    path: str
    discrepancy: dict[str, float]
    notes: tuple[str, ...] = field(default=())

    def to_json(self) -> str:
        return json.dumps(
            {
                "alpha": json.loads(self.alpha.to_json()),
                "path": self.path,
                "discrepancy": self.discrepancy,
                "notes": list(self.notes),
            }
        )


def _discrepancy(alpha: AlphaParams, requested: MomentSummary) -> dict[str, float]:
    achieved = moments_of(alpha)
    gaps = {}
    for name in ("m1", "m2", "v1", "v2", "rho"):
        gaps[name] = abs(getattr(achieved, name) - getattr(requested, name))
    return gaps


def elicit(
    m1: float,
    m2: float,
    v1: float,
    v2: float,
    rho: float,
    preference: str = PREFERENCE_MEANS_FIRST,
) -> ElicitationResult:
    """Choose a concentration vector encoding the requested moments.

    Raises
    ------
    InfeasibleVariance
        If both variances are at least m(1-m), so no path can start.
    """
    if preference not in (PREFERENCE_MEANS_FIRST, PREFERENCE_BALANCED):
        raise ValueError(f"preference must be means-first or balanced, got {preference!r}")
    requested = MomentSummary(m1, m2, v1, v2, rho)
    v1_ok = v1 < m1 * (1.0 - m1)
    v2_ok = v2 < m2 * (1.0 - m2)
    if not v1_ok and not v2_ok:
        raise InfeasibleVariance("both variances exceed the mean-implied bound m(1-m)")

    # (a) exact four-moment inversion, valid when the summary is coherent:
    # equal variance ratios and a correlation strictly inside its interval.
    if v1_ok and v2_ok:
        h1 = m1 * (1.0 - m1) / v1
        h2 = m2 * (1.0 - m2) / v2
        ratios_match = abs(h1 - h2) <= _RATIO_RTOL * max(h1, h2)
        if ratios_match and rho_bounds(m1, m2).contains(rho, strict=True):
            outcome = solve_four_moments(m1, m2, v1, rho)
            if outcome.feasible:
                alpha = AlphaParams.from_array(outcome.alpha)
                return ElicitationResult(alpha, PATH_EXACT, _discrepancy(alpha, requested))

    # (b) three-moment estimate: keeps means and correlation, compromises
    # on the variances; only usable when strictly positive.
    report = mm2(requested)
    if not report.clamped.any() and report.alpha_hat.min() > 0.0:
        alpha = AlphaParams.from_array(report.alpha_hat)
        return ElicitationResult(alpha, PATH_MM2, _discrepancy(alpha, requested))

    # (c) optimizer fallbacks.
    if preference == PREFERENCE_MEANS_FIRST:
        fallback, path = mm3(requested), PATH_MM3
    else:
        fallback, path = mm4(requested), PATH_MM4
    notes = []
    if fallback.clamped.any():
        idx = ", ".join(f"alpha{i + 1}" for i in range(4) if fallback.clamped[i])
        notes.append(f"clamped coordinates floored at {POSITIVITY_FLOOR:g}: {idx}")
    alpha = fallback.as_alpha_params()
    return ElicitationResult(alpha, path, _discrepancy(alpha, requested), tuple(notes))


def beta_variance_from_quantile(mean: float, quantile: float, prob: float) -> float:
    """Convert (mean, one quantile) of a beta marginal into a variance.

    Finds the concentration total s for which Beta(mean*s, (1-mean)*s) has
    P(X <= quantile) = prob, by bisection on log(s) to 1e-10, and returns the
    implied variance mean(1-mean)/(s+1).
    """
    if not 0.0 < mean < 1.0:
        raise ValueError("mean must lie in (0,1)")
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must lie in (0,1)")
    if not 0.0 < prob < 1.0:
        raise ValueError("prob must lie in (0,1)")
    if quantile == mean:
        raise ValueError("the quantile must differ from the mean to pin a spread")

    def cdf_gap(log_s: float) -> float:
        s = np.exp(log_s)
        return float(beta_dist.cdf(quantile, mean * s, (1.0 - mean) * s)) - prob

    lo, hi = np.log(1e-8), np.log(1e8)
    f_lo, f_hi = cdf_gap(lo), cdf_gap(hi)
    if f_lo == 0.0:
        return mean * (1.0 - mean) / (np.exp(lo) + 1.0)
    if f_hi == 0.0:
        return mean * (1.0 - mean) / (np.exp(hi) + 1.0)
    if np.sign(f_lo) == np.sign(f_hi):
        raise ValueError(
            f"no beta with mean {mean} satisfies P(X <= {quantile}) = {prob}: "
            "the requested pair is out of reach"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = cdf_gap(mid)
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo < 1e-10:
            break
    s = float(np.exp(0.5 * (lo + hi)))
    return mean * (1.0 - mean) / (s + 1.0)

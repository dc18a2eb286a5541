"""Model-adequacy checks for data on the unit square.

``gn_test``  asymptotic normal test of the variance-ratio equality
             m1(1-m1)/v1 = m2(1-m2)/v2 that the model imposes.
``m_test``   finite-sample check of the sign of the moment solution: the
             minimum normalized coordinate goes negative when the observed
             moments are incompatible with any parameter vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from ._rng import rng_from
from .core import solve_four_moments
from .errors import DegenerateVariance, InfeasibleVariance, ZeroVariance
from .estimators import empirical_moments
from .types import PairedSample

DEFAULT_M_THRESHOLD = -0.05
_M_BOOTSTRAP_QUANTILES = (1.0, 5.0, 10.0)


@dataclass(frozen=True)
class GnReport:
    g_n: float
    sigma_hat: float
    z: float
    p_value: float
    n: int

    def to_json(self) -> str:
        return json.dumps(
            {"g_n": self.g_n, "sigma_hat": self.sigma_hat, "z": self.z, "p_value": self.p_value, "n": self.n}
        )


@dataclass(frozen=True)
class MReport:
    m_stat: float
    beta_hat: np.ndarray
    c: float
    reject: bool
    bootstrap_quantiles: Optional[dict[str, float]] = None
    dropped_resamples: int = 0

    def __post_init__(self):
        object.__setattr__(self, "beta_hat", np.asarray(self.beta_hat, dtype=float))

    def to_json(self) -> str:
        d = {
            "m_stat": self.m_stat,
            "beta_hat": self.beta_hat.tolist(),
            "c": self.c,
            "reject": self.reject,
        }
        if self.bootstrap_quantiles is not None:
            d["bootstrap_quantiles"] = self.bootstrap_quantiles
            d["dropped_resamples"] = self.dropped_resamples
        return json.dumps(d)


def _gn_statistic(sample: PairedSample) -> tuple[float, float]:
    """(G_n, sigma_hat) from plug-in moments and the delta-method variance."""
    x, y = sample.x, sample.y
    n = sample.n
    x1 = x.mean()
    x3 = y.mean()
    x2 = x.var(ddof=1)
    x4 = y.var(ddof=1)
    g = x1 * (1.0 - x1) * x4 - x2 * (1.0 - x3) * x3
    grad = np.array([(1.0 - 2.0 * x1) * x4, -(1.0 - x3) * x3, -x2 * (1.0 - 2.0 * x3), x1 * (1.0 - x1)])
    varmat = np.cov(np.column_stack([x, (x - x1) ** 2, y, (y - x3) ** 2]).T, ddof=1)
    sigma2 = float(grad @ varmat @ grad)
    return float(g), sigma2


def gn_test(sample: PairedSample) -> GnReport:
    """Two-sided asymptotic test of the variance-ratio equality.

    Raises
    ------
    DegenerateVariance
        If the plug-in variance of the statistic is not positive.
    """
    if sample.n < 5:
        raise ValueError("need at least five observations for fourth moments")
    g, sigma2 = _gn_statistic(sample)
    if not sigma2 > 0.0:
        raise DegenerateVariance(f"plug-in variance {sigma2} is not positive")
    sigma = float(np.sqrt(sigma2))
    z = float(np.sqrt(sample.n) * g / sigma)
    p = float(2.0 * norm.cdf(-abs(z)))
    return GnReport(g_n=g, sigma_hat=sigma, z=z, p_value=p, n=sample.n)


def _m_statistic(sample: PairedSample) -> tuple[float, np.ndarray]:
    moments = empirical_moments(sample)
    outcome = solve_four_moments(moments.m1, moments.m2, moments.v1, moments.rho)
    beta_hat = outcome.alpha / outcome.bar_alpha
    return float(beta_hat.min()), beta_hat


def m_test(
    sample: PairedSample,
    c: float = DEFAULT_M_THRESHOLD,
    B: Optional[int] = None,
    seed: int = 0,
) -> MReport:
    """Minimum-normalized-coordinate test with optional bootstrap quantiles.

    Rejects compatibility with the model when min(beta_hat) <= c.  With B
    given, also reports percentile-bootstrap quantiles (1%, 5%, 10%) of the
    statistic; resamples whose implied concentration total is not positive
    are dropped and counted.

    Raises
    ------
    InfeasibleVariance
        If the sample variance of the first coordinate is not below
        mean(1-mean), so the statistic is undefined.
    """
    m_stat, beta_hat = _m_statistic(sample)
    quantiles = None
    dropped = 0
    if B is not None:
        if B < 2:
            raise ValueError("B must be at least 2")
        n = sample.n
        stats = []
        for b in range(B):
            idx = rng_from(seed, b).integers(0, n, size=n)
            resample = PairedSample(sample.x[idx], sample.y[idx])
            try:
                stats.append(_m_statistic(resample)[0])
            except (InfeasibleVariance, ZeroVariance):
                dropped += 1
        if stats:
            values = np.percentile(stats, _M_BOOTSTRAP_QUANTILES)
            quantiles = {f"q{int(q):02d}": float(v) for q, v in zip(_M_BOOTSTRAP_QUANTILES, values)}
        else:
            quantiles = {}
    return MReport(
        m_stat=m_stat,
        beta_hat=beta_hat,
        c=c,
        reject=bool(m_stat <= c),
        bootstrap_quantiles=quantiles,
        dropped_resamples=dropped,
    )

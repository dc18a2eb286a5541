"""Posterior sampling for the concentration vector, point estimates, checks.

``hmc_fit`` runs the no-U-turn sampler on the augmented posterior; ``be1``
and ``be2`` reduce the draws to the posterior mean and median with equal-
tailed credible intervals; ``ppc`` compares observed moments against the
posterior-implied moment distributions; ``prior_predictive_correlation``
pushes a prior forward through the correlation formula.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .._rng import rng_from
from ..errors import ChainFailure
from ..estimators import EstimateReport, empirical_moments
from ..types import PairedSample
from .convergence import bulk_ess, split_rhat
from .nuts import run_chain
from .posterior import AugmentedPosterior
from .priors import PriorSpec


@dataclass(frozen=True)
class HmcConfig:
    chains: int = 4
    warmup: int = 2000
    iters: int = 2000
    target_accept: float = 0.9
    seed: int = 0
    max_depth: int = 10
    store_latent: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "HmcConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class PosteriorDraws:
    """Stacked posterior draws (chain-major) with sampler diagnostics."""

    draws: np.ndarray                      # (chains*iters, 4) alpha draws
    divergence_count: int
    accept_rate: float
    rhat: np.ndarray                       # (4,)
    ess: np.ndarray                        # (4,)
    chains: int
    warmup: int
    iters: int
    latent_draws: Optional[np.ndarray] = None  # (chains*iters, n)

    def __post_init__(self):
        object.__setattr__(self, "draws", np.asarray(self.draws, dtype=float))
        if self.draws.ndim != 2 or self.draws.shape[1] != 4:
            raise ValueError("draws must have shape (M, 4)")
        if self.draws.size and self.draws.min() <= 0.0:
            raise ValueError("all alpha draws must be strictly positive")

    def by_chain(self) -> np.ndarray:
        return self.draws.reshape(self.chains, self.iters, 4)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("chain,iter,alpha1,alpha2,alpha3,alpha4\n")
        for c in range(self.chains):
            block = self.draws[c * self.iters : (c + 1) * self.iters]
            for i, row in enumerate(block):
                buf.write(f"{c},{i}," + ",".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()

    def diagnostics_json(self) -> str:
        return json.dumps(
            {
                "rhat": self.rhat.tolist(),
                "ess": self.ess.tolist(),
                "divergences": self.divergence_count,
                "accept_rate": self.accept_rate,
                "chains": self.chains,
                "warmup": self.warmup,
                "iters": self.iters,
            }
        )


def hmc_fit(data: PairedSample, prior: PriorSpec, config: HmcConfig = HmcConfig()) -> PosteriorDraws:
    """Sample the augmented posterior with per-chain adaptive NUTS.

    Chains use independent child streams of ``config.seed`` and can run in
    any order; divergences are counted over the sampling phase only.

    Raises
    ------
    ChainFailure
        If a chain cannot find a finite-density initial point in 100 draws.
    """
    if data.n < 2:
        raise ValueError("need at least two observations")
    post = AugmentedPosterior(data, prior)
    n = data.n
    all_draws = []
    all_latent = []
    divergences = 0
    accept_sum = 0.0
    for c in range(config.chains):
        rng = rng_from(config.seed, c)
        q0 = _initial_point(post, rng)
        result = run_chain(
            post.value_and_grad,
            q0,
            rng,
            warmup=config.warmup,
            iters=config.iters,
            target_accept=config.target_accept,
            max_depth=config.max_depth,
        )
        theta = result.draws[:, :4]
        all_draws.append(post.shift + np.exp(theta))
        if config.store_latent:
            w = result.draws[:, 4:]
            all_latent.append(post.lower + post.width * expit(w))
        divergences += int(result.divergent.sum())
        accept_sum += float(result.accept_stats.mean())
    stacked = np.vstack(all_draws)
    per_chain = stacked.reshape(config.chains, config.iters, 4)
    rhat = np.array([split_rhat(per_chain[:, :, j]) for j in range(4)])
    # antithetic chains can push the raw estimate past the draw count
    total = config.chains * config.iters
    ess = np.minimum([bulk_ess(per_chain[:, :, j]) for j in range(4)], float(total))
    return PosteriorDraws(
        draws=stacked,
        divergence_count=divergences,
        accept_rate=accept_sum / config.chains,
        rhat=rhat,
        ess=ess,
        chains=config.chains,
        warmup=config.warmup,
        iters=config.iters,
        latent_draws=np.vstack(all_latent) if all_latent else None,
    )


def _initial_point(post: AugmentedPosterior, rng: np.random.Generator) -> np.ndarray:
    """theta jittered uniformly, latent coordinates at the interval midpoints."""
    for _ in range(100):
        theta = rng.uniform(-1.0, 1.0, size=4)
        q = np.concatenate([theta, np.zeros(post.n)])
        value, _ = post.value_and_grad(q)
        if np.isfinite(value):
            return q
    raise ChainFailure("no finite-density initial point found after 100 draws")


def _point_report(draws: np.ndarray, point: np.ndarray, method: str) -> EstimateReport:
    lower = np.percentile(draws, 2.5, axis=0)
    upper = np.percentile(draws, 97.5, axis=0)
    return EstimateReport(
        alpha_hat=point,
        method=method,
        clamped=np.zeros(4, dtype=bool),
        interval=np.column_stack([lower, upper]),
    )


def be1(draws: PosteriorDraws) -> EstimateReport:
    """Posterior mean with an equal-tailed 95% credible interval."""
    if draws.draws.shape[0] == 0:
        raise ValueError("draws must be nonempty")
    return _point_report(draws.draws, draws.draws.mean(axis=0), "be1")


def be2(draws: PosteriorDraws) -> EstimateReport:
    """Posterior median with an equal-tailed 95% credible interval."""
    if draws.draws.shape[0] == 0:
        raise ValueError("draws must be nonempty")
    return _point_report(draws.draws, np.median(draws.draws, axis=0), "be2")


def moments_of_array(alpha: np.ndarray) -> np.ndarray:
    """Vectorized (m1, m2, v1, v2, rho) for an (M, 4) matrix of parameters."""
    alpha = np.asarray(alpha, dtype=float)
    a1, a2, a3, a4 = alpha.T
    s = alpha.sum(axis=1)
    m1 = (a1 + a2) / s
    m2 = (a1 + a3) / s
    v1 = (a1 + a2) * (a3 + a4) / (s * s * (s + 1.0))
    v2 = (a1 + a3) * (a2 + a4) / (s * s * (s + 1.0))
    rho = (a1 * a4 - a2 * a3) / np.sqrt((a1 + a2) * (a3 + a4) * (a1 + a3) * (a2 + a4))
    return np.column_stack([m1, m2, v1, v2, rho])


MOMENT_NAMES = ("m1", "m2", "v1", "v2", "rho")


@dataclass(frozen=True)
class PpcReport:
    """Posterior-implied moment quantiles against the observed moments."""

    quantiles: np.ndarray   # (5, 3): 2.5%, 50%, 97.5% per moment
    observed: np.ndarray    # (5,)
    inside: np.ndarray      # (5,) bool

    def to_json(self) -> str:
        d = {}
        for i, name in enumerate(MOMENT_NAMES):
            d[name] = {
                "q025": self.quantiles[i, 0],
                "q50": self.quantiles[i, 1],
                "q975": self.quantiles[i, 2],
                "observed": self.observed[i],
                "inside": bool(self.inside[i]),
            }
        return json.dumps(d)


def ppc(draws: PosteriorDraws, data: PairedSample) -> PpcReport:
    """Compare observed moments to their posterior-implied distributions."""
    if draws.draws.shape[0] == 0:
        raise ValueError("draws must be nonempty")
    implied = moments_of_array(draws.draws)
    quantiles = np.percentile(implied, [2.5, 50.0, 97.5], axis=0).T
    obs = np.array(empirical_moments(data).as_tuple())
    inside = (obs >= quantiles[:, 0]) & (obs <= quantiles[:, 2])
    return PpcReport(quantiles=quantiles, observed=obs, inside=inside)


def prior_predictive_correlation(prior: PriorSpec, draws: int, seed: int) -> np.ndarray:
    """Empirical distribution of the correlation under the prior."""
    if draws < 1:
        raise ValueError("draws must be at least 1")
    alpha = prior.sample(rng_from(seed), draws)
    return moments_of_array(alpha)[:, 4]

"""Simulation-based calibration of the posterior sampler.

Each experiment draws a parameter from the prior, simulates data of size n,
fits the posterior, thins the draws to exactly L, and records per-coordinate
rank statistics.  Under a correct sampler the ranks are uniform over the
integers 0..L; uniformity is scored with a chi-square test over the L+1 bins.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import chisquare

from .._rng import derive_seed, rng_from
from ..core import sample as sample_bibeta
from ..errors import ChainFailure
from ..types import AlphaParams
from .fit import HmcConfig, PosteriorDraws, hmc_fit
from .priors import PriorSpec


@dataclass(frozen=True)
class SBCReport:
    ranks: np.ndarray        # (N_ok, 4) integers in [0, L]
    L: int
    n_experiments: int
    p_values: np.ndarray     # (4,) chi-square uniformity p-values
    failed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ranks", np.asarray(self.ranks, dtype=int))
        if self.ranks.size and (self.ranks.min() < 0 or self.ranks.max() > self.L):
            raise ValueError("ranks must lie in [0, L]")

    def histogram(self) -> np.ndarray:
        """(L+1, 4) counts of each rank value per coordinate."""
        counts = np.zeros((self.L + 1, 4), dtype=int)
        for j in range(4):
            counts[:, j] = np.bincount(self.ranks[:, j], minlength=self.L + 1)
        return counts

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        buf.write("rank,alpha1,alpha2,alpha3,alpha4\n")
        for r, row in enumerate(self.histogram()):
            buf.write(f"{r}," + ",".join(str(v) for v in row) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "L": self.L,
                "experiments": self.n_experiments,
                "failed": self.failed,
                "p_values": self.p_values.tolist(),
            }
        )


def rank_statistic(draws: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Number of draws strictly below the generating value, per coordinate."""
    return (np.asarray(draws) < np.asarray(truth)).sum(axis=0)


def thin_to(draws: np.ndarray, L: int) -> np.ndarray:
    """Evenly strided subset of exactly L rows (stride floor(M/L))."""
    m = draws.shape[0]
    stride = m // L
    if stride < 1:
        raise ValueError(f"need at least L={L} draws, got {m}")
    idx = np.arange(1, L + 1) * stride - 1
    return draws[idx]


def sbc(
    prior: PriorSpec,
    n: int,
    L: int,
    N: int,
    config: HmcConfig = HmcConfig(),
    seed: int = 0,
) -> SBCReport:
    """Run N calibration experiments; failed chains are dropped and counted."""
    if L < 1 or N < 1:
        raise ValueError("L and N must be at least 1")
    ranks = []
    failed = 0
    for j in range(N):
        truth = prior.sample(rng_from(seed, j), 1)[0]
        data = sample_bibeta(AlphaParams.from_array(truth), n, derive_seed(seed, j, 1))
        fit_config = HmcConfig(
            chains=config.chains,
            warmup=config.warmup,
            iters=config.iters,
            target_accept=config.target_accept,
            seed=derive_seed(seed, j, 2),
            max_depth=config.max_depth,
        )
        try:
            draws: PosteriorDraws = hmc_fit(data, prior, fit_config)
        except ChainFailure:
            failed += 1
            continue
        thinned = thin_to(draws.draws, L)
        ranks.append(rank_statistic(thinned, truth))
    ranks_arr = np.array(ranks, dtype=int).reshape(-1, 4)
    p_values = uniformity_pvalues(ranks_arr, L)
    return SBCReport(ranks=ranks_arr, L=L, n_experiments=N, p_values=p_values, failed=failed)


def uniformity_pvalues(ranks: np.ndarray, L: int) -> np.ndarray:
    """Chi-square p-value of discrete uniformity over 0..L per coordinate."""
    out = np.full(4, np.nan)
    if ranks.shape[0] == 0:
        return out
    for j in range(4):
        counts = np.bincount(ranks[:, j], minlength=L + 1)
        out[j] = chisquare(counts).pvalue
    return out

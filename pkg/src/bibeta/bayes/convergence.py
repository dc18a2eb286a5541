"""Sampler health diagnostics: split R-hat and rank-normalized bulk ESS."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata


def _split_chains(x: np.ndarray) -> np.ndarray:
    """Split (chains, draws) into halves -> (2*chains, draws//2)."""
    c, m = x.shape
    half = m // 2
    return np.vstack([x[:, :half], x[:, half : 2 * half]])


def split_rhat(x: np.ndarray) -> float:
    """Potential scale reduction over split chains of one scalar quantity."""
    seqs = _split_chains(np.asarray(x, dtype=float))
    if seqs.shape[1] < 2:
        return np.nan
    m = seqs.shape[1]
    means = seqs.mean(axis=1)
    within = seqs.var(axis=1, ddof=1).mean()
    between = m * means.var(ddof=1)
    if within == 0.0:
        return np.nan
    var_plus = (m - 1) / m * within + between / m
    return float(np.sqrt(var_plus / within))


def _rank_normalize(x: np.ndarray) -> np.ndarray:
    flat = rankdata(x, method="average").reshape(x.shape)
    return ndtri((flat - 0.375) / (x.size + 0.25))


def _autocovariance(seq: np.ndarray) -> np.ndarray:
    """Biased autocovariance estimates via FFT, lags 0..len-1."""
    n = seq.size
    centered = seq - seq.mean()
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, size)
    acov = np.fft.irfft(f * np.conjugate(f))[:n].real / n
    return acov


def bulk_ess(x: np.ndarray) -> float:
    """Effective sample size of rank-normalized split chains.

    Combines chains with the variance decomposition of split R-hat and
    truncates the autocorrelation sum by the initial monotone positive
    sequence rule.
    """
    seqs = _split_chains(np.asarray(x, dtype=float))
    c, m = seqs.shape
    if m < 4:
        return np.nan
    z = _rank_normalize(seqs)
    acov = np.vstack([_autocovariance(z[i]) for i in range(c)])
    chain_var = acov[:, 0] * m / (m - 1.0)
    mean_var = chain_var.mean()
    var_plus = mean_var * (m - 1.0) / m
    if c > 1:
        var_plus += z.mean(axis=1).var(ddof=1)
    if var_plus == 0.0:
        return np.nan

    rho = 1.0 - (mean_var - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # Geyer initial monotone positive sequence over even-odd lag pairs.
    n_pairs = rho.size // 2
    pair_sums = rho[0 : 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    total = 0.0
    prev = np.inf
    for ps in pair_sums:
        if ps <= 0.0:
            break
        ps = min(ps, prev)
        total += ps
        prev = ps
    tau = max(-1.0 + 2.0 * total, 1.0 / np.log10(c * m + 10.0))
    ess = c * m / tau
    return float(min(ess, c * m * np.log10(c * m)))

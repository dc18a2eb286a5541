"""Figure rendering for CLI reports.

Every renderer takes already-computed data and a target path, writes one PNG,
and returns the path.  The delimited outputs remain the authoritative record;
figures are a convenience layer on top of them.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy.stats import binom, norm

_ALPHA_LABELS = ("alpha1", "alpha2", "alpha3", "alpha4")


def save_density_heatmap(xs: np.ndarray, ys: np.ndarray, values: np.ndarray, path: Path) -> Path:
    """Grid heatmap; NaN cells (undefined density) are masked out."""
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    masked = np.ma.masked_invalid(values)
    mesh = ax.pcolormesh(xs, ys, masked.T, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="density")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_bootstrap_pairs(estimates: np.ndarray, path: Path, truth=None) -> Path:
    """Pairwise scatter matrix of resample estimates."""
    fig, axes = plt.subplots(4, 4, figsize=(9, 9))
    for i in range(4):
        for j in range(4):
            ax = axes[i, j]
            if i == j:
                ax.hist(estimates[:, i], bins=30, color="steelblue")
                if truth is not None:
                    ax.axvline(truth[i], color="crimson", lw=1)
            else:
                ax.scatter(estimates[:, j], estimates[:, i], s=4, alpha=0.4, color="steelblue")
                if truth is not None:
                    ax.axvline(truth[j], color="crimson", lw=0.8)
                    ax.axhline(truth[i], color="crimson", lw=0.8)
            if i == 3:
                ax.set_xlabel(_ALPHA_LABELS[j])
            if j == 0:
                ax.set_ylabel(_ALPHA_LABELS[i])
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_rank_histograms(histogram: np.ndarray, n_experiments: int, path: Path) -> Path:
    """Rank-statistic histograms with a 95% band under discrete uniformity."""
    bins = histogram.shape[0]
    lo, hi = binom.ppf([0.025, 0.975], n_experiments, 1.0 / bins)
    fig, axes = plt.subplots(1, 4, figsize=(12, 3), sharey=True)
    for j, ax in enumerate(axes):
        ax.bar(np.arange(bins), histogram[:, j], width=1.0, color="steelblue", edgecolor="white")
        ax.axhspan(lo, hi, color="gray", alpha=0.25)
        ax.axhline(n_experiments / bins, color="black", lw=0.8, ls="--")
        ax.set_title(_ALPHA_LABELS[j])
        ax.set_xlabel("rank")
    axes[0].set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_metric_bars(table, metric: str, path: Path) -> Path:
    """Grouped bars of one metric across methods and targets."""
    methods = sorted({m for (m, _) in table.cells})
    targets = list(table.targets)
    width = 0.8 / max(len(methods), 1)
    fig, ax = plt.subplots(figsize=(1.8 * len(targets) + 2, 3.5))
    xs = np.arange(len(targets))
    for k, method in enumerate(methods):
        vals = [table.cells[(method, t)][metric] for t in targets]
        vals = [np.nan if v is None else v for v in vals]
        ax.bar(xs + k * width, vals, width=width, label=method)
    ax.set_xticks(xs + 0.4 - width / 2)
    ax.set_xticklabels(targets)
    ax.set_ylabel(metric)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_statistic_histogram(values: np.ndarray, path: Path, overlay_standard_normal: bool = False) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(values, bins=40, density=True, color="steelblue", edgecolor="white")
    if overlay_standard_normal:
        grid = np.linspace(values.min() - 0.5, values.max() + 0.5, 200)
        ax.plot(grid, norm.pdf(grid), color="crimson", lw=1.2)
    ax.set_ylabel("density")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)

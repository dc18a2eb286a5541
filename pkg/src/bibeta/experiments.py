"""Monte Carlo harness for estimator comparison studies.

Two study designs:

* well-specified: data drawn from the model itself; estimators are scored
  against the generating parameter vector (bias, MSE, MAPE, interval
  coverage).
* misspecified: data drawn from a logit-normal; estimators are scored on the
  moments their fitted parameters imply versus the generator's true moments,
  which are obtained once from a large cached Monte Carlo oracle.

Replications use child seeds of the root seed, so tables are bit-identical
across runs and thread counts.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import expit

from ._rng import DEFAULT_SEED, derive_seed, rng_from
from .bayes import HmcConfig, PriorSpec, be1, be2, hmc_fit
from .core import moments_of, sample as sample_bibeta
from .diagnostics import gn_test, m_test
from .errors import BibetaError, CholeskyFailure
from .estimators import MOMENT_METHODS, bootstrap_ci, empirical_moments, estimate
from .types import AlphaParams, MomentSummary, PairedSample

GENERATOR_BIVARIATE_BETA = "bivariate-beta"
GENERATOR_LOGIT_NORMAL = "logit-normal"

ALPHA_TARGETS = ("alpha1", "alpha2", "alpha3", "alpha4")
MOMENT_TARGETS = ("m1", "m2", "v1", "v2", "rho")

STATISTIC_PN = "pn"
STATISTIC_GN_Z = "gn_z"
STATISTIC_M = "m"

_ORACLE_DRAWS = 10_000_000
_ORACLE_CHUNK = 1_000_000
_ORACLE_SEED = 0x0B1BE7A


def sample_logit_normal(mu: np.ndarray, sigma: np.ndarray, n: int, seed: int) -> PairedSample:
    """Coordinate-wise logistic transform of a bivariate normal sample.

    Raises
    ------
    CholeskyFailure
        If sigma is not symmetric positive definite.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if mu.shape != (2,) or sigma.shape != (2, 2):
        raise ValueError("mu must be length 2 and sigma 2x2")
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as err:
        raise CholeskyFailure(f"sigma is not SPD: {err}") from err
    z = mu + rng_from(seed).standard_normal((n, 2)) @ chol.T
    vals = expit(z)
    vals = np.clip(vals, 1e-15, 1.0 - 1e-15)
    return PairedSample(vals[:, 0], vals[:, 1])


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    alpha: Optional[AlphaParams] = None
    mu: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == GENERATOR_BIVARIATE_BETA:
            if self.alpha is None:
                raise ValueError("bivariate-beta generator needs alpha")
        elif self.kind == GENERATOR_LOGIT_NORMAL:
            mu = np.asarray(self.mu, dtype=float)
            sigma = np.asarray(self.sigma, dtype=float)
            object.__setattr__(self, "mu", mu)
            object.__setattr__(self, "sigma", sigma)
            if mu.shape != (2,) or sigma.shape != (2, 2):
                raise ValueError("logit-normal generator needs mu (2,) and sigma (2,2)")
            if not np.allclose(sigma, sigma.T):
                raise ValueError("sigma must be symmetric")
        else:
            raise ValueError(f"unknown generator kind {self.kind!r}")

    def draw(self, n: int, seed: int) -> PairedSample:
        if self.kind == GENERATOR_BIVARIATE_BETA:
            return sample_bibeta(self.alpha, n, seed)
        return sample_logit_normal(self.mu, self.sigma, n, seed)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        kind = d.get("type", d.get("kind"))
        if kind == GENERATOR_BIVARIATE_BETA:
            return cls(kind=kind, alpha=AlphaParams.from_array(d["alpha"]))
        if kind == GENERATOR_LOGIT_NORMAL:
            return cls(kind=kind, mu=np.asarray(d["mu"], dtype=float), sigma=np.asarray(d["sigma"], dtype=float))
        raise ValueError(f"unknown generator type {kind!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    generator: GeneratorSpec
    n: int
    reps: int = 200
    methods: tuple[str, ...] = MOMENT_METHODS
    bootstrap: int = 200
    level: float = 0.95
    prior: PriorSpec = field(default_factory=lambda: PriorSpec.gamma_iid(1.0, 1.0))
    hmc: HmcConfig = field(default_factory=lambda: HmcConfig(chains=2, warmup=500, iters=500))
    seed: int = DEFAULT_SEED
    threads: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        bad = [m for m in self.methods if m not in MOMENT_METHODS + ("be1", "be2")]
        if bad:
            raise ValueError(f"unknown methods: {bad}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        kwargs = {
            "generator": GeneratorSpec.from_dict(d["generator"]),
            "n": int(d["n"]),
        }
        for key in ("reps", "bootstrap", "seed", "threads"):
            if key in d:
                kwargs[key] = int(d[key])
        if "level" in d:
            kwargs["level"] = float(d["level"])
        if "methods" in d:
            kwargs["methods"] = tuple(str(m).lower() for m in d["methods"])
        if "prior" in d:
            kwargs["prior"] = PriorSpec.from_json(json.dumps(d["prior"]))
        if "hmc" in d:
            kwargs["hmc"] = HmcConfig.from_dict(d["hmc"])
        return cls(**kwargs)


@dataclass(frozen=True)
class MetricsTable:
    """Per-(method, target) aggregates of a replication study."""

    targets: tuple[str, ...]
    cells: dict  # (method, target) -> {"bias","mse","mape","coverage"|None}
    reps: dict   # method -> successful replication count
    failed: dict  # method -> failed replication count

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("method,target,bias,mse,mape,coverage,reps,failed\n")
        for (method, target), cell in self.cells.items():
            cov = "" if cell["coverage"] is None else f"{cell['coverage']:.17g}"
            buf.write(
                f"{method},{target},{cell['bias']:.17g},{cell['mse']:.17g},"
                f"{cell['mape']:.17g},{cov},{self.reps[method]},{self.failed[method]}\n"
            )
        return buf.getvalue()

    def to_json(self) -> str:
        out = {}
        for (method, target), cell in self.cells.items():
            out.setdefault(method, {})[target] = cell
        return json.dumps({"cells": out, "reps": self.reps, "failed": self.failed})

    def metric(self, method: str, target: str, name: str) -> float:
        return self.cells[(method, target)][name]


def _aggregate(
    targets: tuple[str, ...],
    estimates: dict,
    covers: dict,
    failures: dict,
    truth: np.ndarray,
) -> MetricsTable:
    cells = {}
    reps = {}
    for method, rows in estimates.items():
        arr = np.array([r for r in rows if r is not None])
        reps[method] = int(arr.shape[0])
        cov_rows = [c for c in covers.get(method, []) if c is not None]
        cov = np.array(cov_rows) if cov_rows else None
        for j, target in enumerate(targets):
            if arr.size == 0:
                cells[(method, target)] = {"bias": np.nan, "mse": np.nan, "mape": np.nan, "coverage": None}
                continue
            err = arr[:, j] - truth[j]
            cells[(method, target)] = {
                "bias": float(err.mean()),
                "mse": float((err**2).mean()),
                "mape": float(np.abs(err / truth[j]).mean()),
                "coverage": None if cov is None else float(cov[:, j].mean()),
            }
    return MetricsTable(targets=targets, cells=cells, reps=reps, failed=failures)


def _needs_hmc(methods) -> bool:
    return any(m in ("be1", "be2") for m in methods)


def _map_replications(worker, reps: int, threads: int) -> list:
    slots = [None] * reps
    if threads <= 1:
        for r in range(reps):
            slots[r] = worker(r)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for r, value in enumerate(pool.map(worker, range(reps))):
                slots[r] = value
    return slots


def run_well_specified(spec: ExperimentSpec) -> MetricsTable:
    """Estimate alpha repeatedly from model data and score against truth."""
    if spec.generator.kind != GENERATOR_BIVARIATE_BETA:
        raise ValueError("well-specified study needs the bivariate-beta generator")
    truth = spec.generator.alpha.as_array()

    def one_rep(r: int):
        data = spec.generator.draw(spec.n, derive_seed(spec.seed, r))
        row = {}
        draws = None
        if _needs_hmc(spec.methods):
            try:
                cfg = replace(spec.hmc, seed=derive_seed(spec.seed, r, 1))
                draws = hmc_fit(data, spec.prior, cfg)
            except BibetaError:
                draws = None
        for method in spec.methods:
            try:
                if method in MOMENT_METHODS:
                    est = estimate(data, method)
                    cover = None
                    if spec.bootstrap >= 2:
                        ci = bootstrap_ci(
                            data, method, B=spec.bootstrap, level=spec.level,
                            seed=derive_seed(spec.seed, r, 2),
                        )
                        cover = (ci.lower <= truth) & (truth <= ci.upper)
                    row[method] = (est.alpha_hat, cover)
                else:
                    if draws is None:
                        raise BibetaError("posterior fit unavailable")
                    report = be1(draws) if method == "be1" else be2(draws)
                    cover = (report.interval[:, 0] <= truth) & (truth <= report.interval[:, 1])
                    row[method] = (report.alpha_hat, cover)
            except BibetaError:
                row[method] = None
        return row

    rows = _map_replications(one_rep, spec.reps, spec.threads)
    estimates = {m: [] for m in spec.methods}
    covers = {m: [] for m in spec.methods}
    failures = {m: 0 for m in spec.methods}
    for row in rows:
        for m in spec.methods:
            if row[m] is None:
                failures[m] += 1
                continue
            est, cover = row[m]
            estimates[m].append(est)
            covers[m].append(cover)
    return _aggregate(ALPHA_TARGETS, estimates, covers, failures, truth)


def logit_normal_true_moments(
    mu: np.ndarray,
    sigma: np.ndarray,
    draws: int = _ORACLE_DRAWS,
    cache_dir: Optional[Path] = None,
) -> MomentSummary:
    """Monte Carlo oracle for the logit-normal moments, cached on disk.

    The value depends only on (mu, sigma, draws); it uses a fixed internal
    seed and is written to a JSON file keyed by those parameters.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    key_src = json.dumps(["logit-normal-moments-v1", mu.tolist(), sigma.tolist(), draws])
    key = hashlib.sha256(key_src.encode()).hexdigest()[:24]
    cache_dir = Path(
        cache_dir
        or os.environ.get("BIBETA_CACHE_DIR", Path.home() / ".cache" / "bibeta")
    )
    cache_file = cache_dir / f"{key}.json"
    if cache_file.exists():
        d = json.loads(cache_file.read_text())
        return MomentSummary(d["m1"], d["m2"], d["v1"], d["v2"], d["rho"])

    chol = np.linalg.cholesky(sigma)
    sums = np.zeros(2)
    sums_sq = np.zeros(2)
    sum_xy = 0.0
    done = 0
    chunk_idx = 0
    while done < draws:
        k = min(_ORACLE_CHUNK, draws - done)
        z = mu + rng_from(_ORACLE_SEED, chunk_idx).standard_normal((k, 2)) @ chol.T
        vals = expit(z)
        sums += vals.sum(axis=0)
        sums_sq += (vals**2).sum(axis=0)
        sum_xy += float(vals[:, 0] @ vals[:, 1])
        done += k
        chunk_idx += 1
    mean = sums / draws
    var = sums_sq / draws - mean**2
    cov = sum_xy / draws - mean[0] * mean[1]
    moments = MomentSummary(
        float(mean[0]), float(mean[1]), float(var[0]), float(var[1]),
        float(cov / np.sqrt(var[0] * var[1])),
    )
    cache_dir.mkdir(parents=True, exist_ok=True)
    cache_file.write_text(moments.to_json())
    return moments


def run_misspecified(spec: ExperimentSpec, cache_dir: Optional[Path] = None) -> MetricsTable:
    """Score fitted-model moments against the generator's true moments."""
    if spec.generator.kind != GENERATOR_LOGIT_NORMAL:
        raise ValueError("misspecified study needs the logit-normal generator")
    truth_summary = logit_normal_true_moments(spec.generator.mu, spec.generator.sigma, cache_dir=cache_dir)
    truth = np.array(truth_summary.as_tuple())

    def one_rep(r: int):
        data = spec.generator.draw(spec.n, derive_seed(spec.seed, r))
        row = {}
        draws = None
        if _needs_hmc(spec.methods):
            try:
                cfg = replace(spec.hmc, seed=derive_seed(spec.seed, r, 1))
                draws = hmc_fit(data, spec.prior, cfg)
            except BibetaError:
                draws = None
        for method in spec.methods:
            try:
                if method in MOMENT_METHODS:
                    report = estimate(data, method)
                else:
                    if draws is None:
                        raise BibetaError("posterior fit unavailable")
                    report = be1(draws) if method == "be1" else be2(draws)
                implied = moments_of(report.as_alpha_params())
                row[method] = np.array(implied.as_tuple())
            except BibetaError:
                row[method] = None
        return row

    rows = _map_replications(one_rep, spec.reps, spec.threads)
    estimates = {m: [] for m in spec.methods}
    failures = {m: 0 for m in spec.methods}
    for row in rows:
        for m in spec.methods:
            if row[m] is None:
                failures[m] += 1
            else:
                estimates[m].append(row[m])
    return _aggregate(MOMENT_TARGETS, estimates, {}, failures, truth)


@dataclass(frozen=True)
class DistributionSummary:
    """Empirical distribution of a replicated statistic."""

    statistic: str
    values: np.ndarray
    failed: int
    quantiles: dict[str, float]
    bin_edges: np.ndarray
    counts: np.ndarray
    prob_outside: Optional[float] = None  # P(Pn outside [0, 0.2]), Pn only

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        buf.write("bin_left,bin_right,count\n")
        for left, right, count in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
            buf.write(f"{left:.17g},{right:.17g},{int(count)}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        d = {
            "statistic": self.statistic,
            "replications": int(self.values.size),
            "failed": self.failed,
            "quantiles": self.quantiles,
        }
        if self.prob_outside is not None:
            d["prob_outside_0_0.2"] = self.prob_outside
        return json.dumps(d)


def sampling_distribution(
    statistic: str,
    generator: GeneratorSpec,
    n: int,
    reps: int,
    seed: int = DEFAULT_SEED,
    bins: int = 40,
) -> DistributionSummary:
    """Replicate the generator and summarize one statistic's distribution."""
    if statistic not in (STATISTIC_PN, STATISTIC_GN_Z, STATISTIC_M):
        raise ValueError(f"unknown statistic {statistic!r}")
    if reps < 1:
        raise ValueError("reps must be at least 1")
    values = []
    failed = 0
    for r in range(reps):
        data = generator.draw(n, derive_seed(seed, r))
        try:
            if statistic == STATISTIC_PN:
                values.append(empirical_moments(data).rho)
            elif statistic == STATISTIC_GN_Z:
                values.append(gn_test(data).z)
            else:
                values.append(m_test(data).m_stat)
        except BibetaError:
            failed += 1
    arr = np.array(values)
    qs = (1.0, 2.5, 5.0, 10.0, 25.0, 50.0, 75.0, 90.0, 95.0, 97.5, 99.0)
    quantiles = {f"q{q:g}": float(v) for q, v in zip(qs, np.percentile(arr, qs))} if arr.size else {}
    counts, edges = np.histogram(arr, bins=bins) if arr.size else (np.array([]), np.array([0.0, 1.0]))
    prob_outside = None
    if statistic == STATISTIC_PN and arr.size:
        prob_outside = float(((arr < 0.0) | (arr > 0.2)).mean())
    return DistributionSummary(
        statistic=statistic,
        values=arr,
        failed=failed,
        quantiles=quantiles,
        bin_edges=edges,
        counts=counts,
        prob_outside=prob_outside,
    )


def time_methods(
    alpha: AlphaParams,
    n: int,
    methods: tuple[str, ...] = MOMENT_METHODS,
    repeats: int = 30,
    seed: int = DEFAULT_SEED,
) -> dict[str, float]:
    """Median wall time per fit for each moment method on fresh samples."""
    times: dict[str, list[float]] = {m: [] for m in methods}
    for r in range(repeats):
        data = sample_bibeta(alpha, n, derive_seed(seed, r))
        moments = empirical_moments(data)
        from .estimators import mm1, mm2, mm3, mm4

        fitters = {"mm1": mm1, "mm2": mm2, "mm3": mm3, "mm4": mm4}
        for m in methods:
            start = time.perf_counter()
            try:
                fitters[m](moments)
            except BibetaError:
                pass
            times[m].append(time.perf_counter() - start)
    return {m: float(np.median(v)) for m, v in times.items()}

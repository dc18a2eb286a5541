"""Empirical moments and the four method-of-moments estimators.

mm1  solves the four-equation moment system exactly (second variance ignored)
     and truncates non-positive coordinates at zero.
mm2  solves the three-equation system in (m1, m2, rho) with the free scale
     chosen to least-squares match both variance relations.
mm3  matches both means exactly and optimizes the remaining scale/correlation
     residuals over (alpha3, alpha4).
mm4  least-squares on all five moments subject to an upper bound on the
     concentration total.

All estimators consume a :class:`~bibeta.types.MomentSummary`; pair them with
:func:`empirical_moments` for data.  ``bootstrap_ci`` wraps any of them with
nonparametric percentile intervals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from ._rng import rng_from
from .errors import DegenerateDenominator, InfeasibleVariance, OptimizerFailure, ZeroVariance
from .types import AlphaParams, MomentSummary, PairedSample

MOMENT_METHODS = ("mm1", "mm2", "mm3", "mm4")
ALL_METHODS = MOMENT_METHODS + ("be1", "be2")

# Truncated coordinates are reported as exact zeros; operations that demand
# positivity (sampling, density, posterior work) replace them with this floor.
POSITIVITY_FLOOR = 1e-10

# Strict inequalities are relaxed to >= this margin inside the optimizers.
_CONSTRAINT_MARGIN = 1e-8
_PENALTY_WEIGHT = 1e20
_RESTART_SHIFTS = (0.0, 0.4, -0.4, 0.8, -0.8)


@dataclass(frozen=True)
class EstimateReport:
    """Point estimate with clamping provenance and optional intervals."""

    alpha_hat: np.ndarray
    method: str
    clamped: np.ndarray
    converged: Optional[bool] = None
    objective: Optional[float] = None
    interval: Optional[np.ndarray] = None  # (4, 2) equal-tailed bounds

    def __post_init__(self):
        object.__setattr__(self, "alpha_hat", np.asarray(self.alpha_hat, dtype=float))
        object.__setattr__(self, "clamped", np.asarray(self.clamped, dtype=bool))
        if self.interval is not None:
            object.__setattr__(self, "interval", np.asarray(self.interval, dtype=float))
        if self.alpha_hat.shape != (4,) or self.clamped.shape != (4,):
            raise ValueError("alpha_hat and clamped must have 4 entries")
        if self.alpha_hat.min() < 0.0:
            raise ValueError("alpha_hat coordinates must be nonnegative")
        if self.method not in ALL_METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def as_alpha_params(self) -> AlphaParams:
        """Parameters with zero coordinates floored for positivity."""
        return AlphaParams.from_array(np.maximum(self.alpha_hat, POSITIVITY_FLOOR))

    def to_json(self) -> str:
        d = {
            "method": self.method,
            "alpha_hat": self.alpha_hat.tolist(),
            "clamped": self.clamped.tolist(),
        }
        if self.converged is not None:
            d["converged"] = self.converged
        if self.objective is not None:
            d["objective"] = self.objective
        if self.interval is not None:
            d["interval"] = {"lower": self.interval[:, 0].tolist(), "upper": self.interval[:, 1].tolist()}
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "EstimateReport":
        d = json.loads(text)
        interval = None
        if "interval" in d:
            interval = np.column_stack([d["interval"]["lower"], d["interval"]["upper"]])
        return cls(
            alpha_hat=np.array(d["alpha_hat"], dtype=float),
            method=d["method"],
            clamped=np.array(d["clamped"], dtype=bool),
            converged=d.get("converged"),
            objective=d.get("objective"),
            interval=interval,
        )


@dataclass(frozen=True)
class BootstrapCI:
    """Percentile bootstrap intervals with the resample estimates retained."""

    lower: np.ndarray
    upper: np.ndarray
    level: float
    B: int
    resample_estimates: np.ndarray = field(repr=False)
    failed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "resample_estimates", np.asarray(self.resample_estimates, dtype=float))
        if self.B < 2:
            raise ValueError("B must be at least 2")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0,1)")

    def to_json(self) -> str:
        return json.dumps(
            {
                "lower": self.lower.tolist(),
                "upper": self.upper.tolist(),
                "level": self.level,
                "B": self.B,
                "failed": self.failed,
            }
        )

    def resamples_csv(self) -> str:
        lines = ["alpha1,alpha2,alpha3,alpha4"]
        for row in self.resample_estimates:
            lines.append(",".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"


def empirical_moments(sample: PairedSample) -> MomentSummary:
    """Sample means, unbiased variances, and Pearson correlation.

    Raises
    ------
    ZeroVariance
        If either coordinate is constant, making the correlation undefined.
    """
    if sample.n < 2:
        raise ValueError("need at least two observations for sample variances")
    x, y = sample.x, sample.y
    n = sample.n
    m1 = float(x.mean())
    m2 = float(y.mean())
    dx = x - m1
    dy = y - m2
    v1 = float(dx @ dx / (n - 1))
    v2 = float(dy @ dy / (n - 1))
    if v1 == 0.0 or v2 == 0.0:
        raise ZeroVariance("a coordinate is constant; correlation is undefined")
    rho = float(dx @ dy / ((n - 1) * np.sqrt(v1 * v2)))
    return MomentSummary(m1, m2, v1, v2, float(np.clip(rho, -1.0, 1.0)))


def _clamp(alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    clamped = alpha <= 0.0
    return np.where(clamped, 0.0, alpha), clamped


def mm1(moments: MomentSummary) -> EstimateReport:
    """Exact four-equation solve, truncated at zero coordinate-wise.

    Raises
    ------
    InfeasibleVariance
        If v1 >= m1(1-m1).
    """
    from .core import solve_four_moments

    outcome = solve_four_moments(moments.m1, moments.m2, moments.v1, moments.rho)
    alpha, clamped = _clamp(outcome.alpha)
    return EstimateReport(alpha_hat=alpha, method="mm1", clamped=clamped)


def mm2(moments: MomentSummary) -> EstimateReport:
    """Three-equation solve with the scale set from both variance relations.

    The free parameter alpha4 is chosen to minimize the two squared
    deviations of (s_alpha + 1) from m1(1-m1)/v1 and m2(1-m2)/v2, whose
    minimizer is their average minus one.

    Raises
    ------
    DegenerateDenominator
        If the shared denominator of the three-moment solution is exactly 0.
    """
    m1_, m2_, v1, v2, rho = moments.as_tuple()
    root = np.sqrt(m1_ * m2_ * (1.0 - m1_) * (1.0 - m2_))
    denom = (1.0 - m1_) * (1.0 - m2_) + rho * root
    if denom == 0.0:
        raise DegenerateDenominator("three-moment denominator is zero")
    h1 = m1_ * (1.0 - m1_) / v1
    h2 = m2_ * (1.0 - m2_) / v2
    s_target = 0.5 * (h1 + h2) - 1.0
    a4 = denom * s_target
    raw = np.array(
        [
            a4 * (m1_ * m2_ + rho * root) / denom,
            a4 * (m1_ * (1.0 - m2_) - rho * root) / denom,
            a4 * (m2_ * (1.0 - m1_) - rho * root) / denom,
            a4,
        ]
    )
    alpha, clamped = _clamp(raw)
    return EstimateReport(alpha_hat=alpha, method="mm2", clamped=clamped)


def _alternating(dim: int, roll: int) -> np.ndarray:
    base = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(dim)])
    return np.roll(base, roll)


def _simplex_minimize(objective: Callable[[np.ndarray], float], theta0: np.ndarray):
    """Nelder-Mead with deterministic perturbed restarts; returns best point."""
    best_theta, best_val = None, np.inf
    for k, shift in enumerate(_RESTART_SHIFTS):
        start = theta0 + shift * _alternating(theta0.size, k)
        res = optimize.minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000, "maxfev": 8000},
        )
        if np.isfinite(res.fun) and res.fun < best_val:
            best_theta, best_val = res.x, float(res.fun)
    if best_theta is None:
        raise OptimizerFailure("no restart produced a finite objective")
    return best_theta, best_val


def _hinge_penalty(values: np.ndarray) -> float:
    gap = np.maximum(0.0, _CONSTRAINT_MARGIN - values)
    return _PENALTY_WEIGHT * float(gap @ gap)


def mm3(moments: MomentSummary) -> EstimateReport:
    """Mean-exact estimator: optimize (alpha3, alpha4), reconstruct the rest.

    alpha1 and alpha2 follow from the mean equations, so both means are
    matched exactly at any feasible point; the objective trades off the two
    variance relations and the correlation relation.
    """
    m1_, m2_, v1, v2, rho = moments.as_tuple()
    h1 = m1_ * (1.0 - m1_) / v1
    h2 = m2_ * (1.0 - m2_) / v2
    root = np.sqrt(m1_ * m2_ * (1.0 - m1_) * (1.0 - m2_))
    e_ratio = m2_ - rho * root / (1.0 - m1_)

    def reconstruct(a3: float, a4: float) -> np.ndarray:
        a1 = ((m1_ + m2_ - 1.0) * a3 + m2_ * a4) / (1.0 - m1_)
        a2 = ((1.0 - m2_) * a3 + (m1_ - m2_) * a4) / (1.0 - m1_)
        return np.array([a1, a2, a3, a4])

    def objective(theta: np.ndarray) -> float:
        a3, a4 = np.exp(theta)
        s = (a3 + a4) / (1.0 - m1_)
        r1 = s + 1.0 - h1
        r2 = s + 1.0 - h2
        r3 = (e_ratio - 1.0) * a3 + e_ratio * a4
        cons = np.array(
            [(m1_ + m2_ - 1.0) * a3 + m2_ * a4, (1.0 - m2_) * a3 + (m1_ - m2_) * a4]
        )
        return r1 * r1 + r2 * r2 + r3 * r3 + _hinge_penalty(cons)

    theta0 = _mm3_initial(moments)
    theta, _ = _simplex_minimize(objective, theta0)
    a3, a4 = np.exp(theta)
    raw = reconstruct(a3, a4)
    alpha, clamped = _clamp(raw)
    s = (a3 + a4) / (1.0 - m1_)
    value = (s + 1.0 - h1) ** 2 + (s + 1.0 - h2) ** 2 + ((e_ratio - 1.0) * a3 + e_ratio * a4) ** 2
    return EstimateReport(
        alpha_hat=alpha,
        method="mm3",
        clamped=clamped,
        converged=bool(not clamped.any()),
        objective=float(value),
    )


def _mm3_initial(moments: MomentSummary) -> np.ndarray:
    """Starting point from the analytic three-moment estimate."""
    guess = mm2(moments).alpha_hat[2:]
    guess = np.where(guess > 0.0, guess, 1e-2)
    return np.log(guess)


def mm4(moments: MomentSummary) -> EstimateReport:
    """Full five-moment least squares under the concentration-total bound.

    Minimizes the squared deviations of all five theoretical moments from the
    supplied summary over strictly positive alpha, subject to
    s_alpha <= max(m1(1-m1)/v1, m2(1-m2)/v2) - 1.

    Raises
    ------
    OptimizerFailure
        If the constraint set is empty or no restart converges.
    """
    from .core import moments_of

    m1_, m2_, v1, v2, rho = moments.as_tuple()
    bound = max(m1_ * (1.0 - m1_) / v1, m2_ * (1.0 - m2_) / v2) - 1.0
    if bound <= 0.0:
        raise OptimizerFailure("the concentration-total bound is not positive: no feasible point")

    target = np.array([m1_, m2_, rho, v1, v2])

    def residuals(alpha: np.ndarray) -> np.ndarray:
        mm = moments_of(AlphaParams.from_array(alpha))
        return target - np.array([mm.m1, mm.m2, mm.rho, mm.v1, mm.v2])

    def objective(theta: np.ndarray) -> float:
        alpha = np.exp(theta)
        if not np.all(np.isfinite(alpha)) or alpha.min() <= 0.0:
            return np.inf
        r = residuals(alpha)
        slack = np.array([bound - alpha.sum()])
        return float(r @ r) + _hinge_penalty(slack + _CONSTRAINT_MARGIN)

    theta0 = _mm4_initial(moments, bound)
    theta, _ = _simplex_minimize(objective, theta0)
    alpha = np.exp(theta)
    if alpha.sum() > bound:
        alpha = alpha * (bound / alpha.sum())
    r = residuals(np.maximum(alpha, 1e-300))
    # exp(theta) can underflow when a coordinate is driven to the boundary.
    clamped = alpha == 0.0
    return EstimateReport(
        alpha_hat=alpha,
        method="mm4",
        clamped=clamped,
        converged=True,
        objective=float(r @ r),
    )


def _mm4_initial(moments: MomentSummary, bound: float) -> np.ndarray:
    try:
        start = mm1(moments).alpha_hat.copy()
        start[start <= 0.0] = 1e-2
    except InfeasibleVariance:
        start = np.full(4, max(bound, 0.1) / 8.0)
    if start.sum() > bound:
        start = start * (bound / start.sum()) * 0.999
    return np.log(start)


def estimate(sample: PairedSample, method: str) -> EstimateReport:
    """Fit one of the moment methods to data."""
    if method not in MOMENT_METHODS:
        raise ValueError(f"method must be one of {MOMENT_METHODS}, got {method!r}")
    fitter = {"mm1": mm1, "mm2": mm2, "mm3": mm3, "mm4": mm4}[method]
    return fitter(empirical_moments(sample))


def bootstrap_ci(
    sample: PairedSample,
    method: str,
    B: int = 500,
    level: float = 0.95,
    seed: int = 0,
) -> BootstrapCI:
    """Nonparametric percentile bootstrap over pairs.

    Resample b draws indices with the child stream (seed, b), so the result
    is reproducible and independent of any parallel scheduling.  Resamples on
    which the estimator fails are dropped and counted.
    """
    if method not in MOMENT_METHODS:
        raise ValueError(f"bootstrap supports {MOMENT_METHODS}, got {method!r}")
    if sample.n < 2:
        raise ValueError("need at least two observations")
    if B < 2:
        raise ValueError("B must be at least 2")
    n = sample.n
    estimates = []
    failed = 0
    last_error: Exception | None = None
    for b in range(B):
        idx = rng_from(seed, b).integers(0, n, size=n)
        resample = PairedSample(sample.x[idx], sample.y[idx])
        try:
            estimates.append(estimate(resample, method).alpha_hat)
        except (InfeasibleVariance, ZeroVariance, DegenerateDenominator, OptimizerFailure) as err:
            failed += 1
            last_error = err
    if not estimates:
        raise last_error if last_error is not None else OptimizerFailure("all resamples failed")
    est = np.vstack(estimates)
    tail = 100.0 * (1.0 - level) / 2.0
    lower = np.percentile(est, tail, axis=0)
    upper = np.percentile(est, 100.0 - tail, axis=0)
    return BootstrapCI(
        lower=lower, upper=upper, level=level, B=B, resample_estimates=est, failed=failed
    )

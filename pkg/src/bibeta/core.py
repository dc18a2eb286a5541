"""The four-parameter bivariate beta distribution.

Construction: U ~ Dirichlet(alpha1..alpha4) on the 3-simplex, X = U1 + U2,
Y = U1 + U3.  The marginals are Beta(alpha1+alpha2, alpha3+alpha4) and
Beta(alpha1+alpha3, alpha2+alpha4); the correlation can take any value in
(-1, 1).  This module provides the closed-form moment algebra, the analytic
inversions of the moment equations, the joint density via one-dimensional
quadrature, and exact sampling through independent gamma variates.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy import integrate
from scipy.special import expit, gammaln, log_expit

from ._rng import rng_from
from .errors import (
    DegenerateDenominator,
    InfeasibleVariance,
    QuadratureFailure,
    UndefinedDensity,
)
from .types import AlphaParams, MomentSummary, PairedSample, RhoInterval, SolverOutcome

# Absolute tolerance for detecting the singular sets x = y and x + y = 1.
SINGULAR_SET_ATOL = 1e-12
# Below this width the integration interval is treated as a zero-measure set.
DEGENERATE_OMEGA_TOL = 1e-15
# Samples are clamped into this closed sub-square so that extreme gamma
# variates cannot round onto the boundary of the unit square.
_INTERIOR_CLIP = 1e-15


def log_beta_const(alpha: np.ndarray) -> float:
    """log of the Dirichlet normalizing constant B(alpha), via log-gamma."""
    alpha = np.asarray(alpha, dtype=float)
    return float(np.sum(gammaln(alpha)) - gammaln(np.sum(alpha)))


def moments_of(alpha: AlphaParams) -> MomentSummary:
    """Exact moments (m1, m2, v1, v2, rho) of the distribution.

    m1 = (a1+a2)/s, m2 = (a1+a3)/s, v1 = m1(1-m1)/(s+1), v2 = m2(1-m2)/(s+1)
    and rho = (a1 a4 - a2 a3) / sqrt((a1+a2)(a3+a4)(a1+a3)(a2+a4)).
    """
    a1, a2, a3, a4 = alpha.alpha1, alpha.alpha2, alpha.alpha3, alpha.alpha4
    s = alpha.sum
    m1 = (a1 + a2) / s
    m2 = (a1 + a3) / s
    v1 = (a1 + a2) * (a3 + a4) / (s * s * (s + 1.0))
    v2 = (a1 + a3) * (a2 + a4) / (s * s * (s + 1.0))
    rho = (a1 * a4 - a2 * a3) / np.sqrt((a1 + a2) * (a3 + a4) * (a1 + a3) * (a2 + a4))
    return MomentSummary(m1, m2, v1, v2, float(np.clip(rho, -1.0, 1.0)))


def _check_means(m1: float, m2: float) -> None:
    if not (0.0 < m1 < 1.0 and 0.0 < m2 < 1.0):
        raise ValueError(f"means must lie in (0,1), got ({m1}, {m2})")


def solve_four_moments(m1: float, m2: float, v1: float, rho: float) -> SolverOutcome:
    """Invert (m1, m2, v1, rho) -> alpha analytically.

    The unique solution of the moment equations with the second variance
    dropped.  Coordinates of the result may be non-positive; ``feasible``
    flags whether all four are > 0.

    Raises
    ------
    InfeasibleVariance
        If v1 >= m1(1-m1), i.e. the implied concentration total is <= 0.
    """
    _check_means(m1, m2)
    if v1 <= 0.0:
        raise ValueError(f"v1 must be positive, got {v1}")
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [-1,1], got {rho}")
    bar_alpha = (m1 - m1 * m1 - v1) / v1
    if bar_alpha <= 0.0:
        raise InfeasibleVariance(
            f"v1={v1} is not below m1(1-m1)={m1 * (1 - m1)}: no positive concentration total exists"
        )
    root = np.sqrt(m1 * m2 * (1.0 - m1) * (1.0 - m2))
    a4 = bar_alpha * (rho * root + (1.0 - m1) * (1.0 - m2))
    a1 = (m1 + m2 - 1.0) * bar_alpha + a4
    a2 = (1.0 - m2) * bar_alpha - a4
    a3 = (1.0 - m1) * bar_alpha - a4
    alpha = np.array([a1, a2, a3, a4])
    return SolverOutcome(alpha=alpha, feasible=bool(alpha.min() > 0.0), bar_alpha=bar_alpha)


def solve_three_moments(m1: float, m2: float, rho: float, alpha4: float) -> SolverOutcome:
    """Invert (m1, m2, rho) -> alpha with alpha4 as the free scale.

    Raises
    ------
    DegenerateDenominator
        If (1-m1)(1-m2) + rho*sqrt(m1 m2 (1-m1)(1-m2)) <= 0.
    """
    _check_means(m1, m2)
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [-1,1], got {rho}")
    if alpha4 <= 0.0:
        raise ValueError(f"alpha4 must be positive, got {alpha4}")
    root = np.sqrt(m1 * m2 * (1.0 - m1) * (1.0 - m2))
    denom = (1.0 - m1) * (1.0 - m2) + rho * root
    if denom <= 0.0:
        raise DegenerateDenominator(f"shared denominator {denom} is not positive")
    a1 = alpha4 * (m1 * m2 + rho * root) / denom
    a2 = alpha4 * (m1 * (1.0 - m2) - rho * root) / denom
    a3 = alpha4 * (m2 * (1.0 - m1) - rho * root) / denom
    alpha = np.array([a1, a2, a3, alpha4])
    bar_alpha = float(alpha.sum())
    return SolverOutcome(alpha=alpha, feasible=bool(alpha.min() > 0.0), bar_alpha=bar_alpha)


def rho_bounds(m1: float, m2: float) -> RhoInterval:
    """Open interval of correlations compatible with marginal means (m1, m2)."""
    _check_means(m1, m2)
    root = np.sqrt(m1 * m2 * (1.0 - m1) * (1.0 - m2))
    lower = -min(m1 * m2, (1.0 - m1) * (1.0 - m2)) / root
    upper = (min(m1, m2) - m1 * m2) / root
    return RhoInterval(float(max(lower, -1.0)), float(min(upper, 1.0)))


def is_density_defined(alpha: AlphaParams, x: float, y: float) -> bool:
    """Whether the joint density exists at (x, y).

    The defining integral diverges exactly when a1+a4 <= 1 on the
    anti-diagonal x+y = 1, or a2+a3 <= 1 on the diagonal x = y.  Equality
    with the singular lines is tested to absolute tolerance 1e-12 so that
    grid evaluation does not trip on floating-point near-misses.
    """
    _check_point(x, y)
    if alpha.alpha1 + alpha.alpha4 <= 1.0 and abs(x + y - 1.0) <= SINGULAR_SET_ATOL:
        return False
    if alpha.alpha2 + alpha.alpha3 <= 1.0 and abs(x - y) <= SINGULAR_SET_ATOL:
        return False
    return True


def _check_point(x: float, y: float) -> None:
    if not (0.0 < x < 1.0 and 0.0 < y < 1.0):
        raise ValueError(f"(x, y) must lie strictly inside the unit square, got ({x}, {y})")


def _t_range(alpha_left: float, alpha_right: float) -> float:
    """Half-width of the transformed integration range.

    Wide enough that the mass beyond the last node is below exp(-25) relative
    to the nearest endpoint singularity u^(a-1).
    """
    a_min = min(alpha_left, alpha_right, 1.0)
    return float(min(12.0, max(4.0, np.arcsinh(25.0 / (np.pi * a_min)))))


def _integrand_setup(alpha: AlphaParams, x: float, y: float):
    """Precompute endpoint offsets and exponents for the transformed integrand.

    The integration variable u runs over Omega = (L, U) with
    L = max(0, x+y-1), U = min(x, y).  Each of the four factors of the
    integrand vanishes at one endpoint of the unit-square geometry; writing
    each factor as (offset + distance-from-endpoint) keeps the evaluation
    exact near the singular endpoints.
    """
    L = max(0.0, x + y - 1.0)
    U = min(x, y)
    d = U - L
    # (u), (x-u), (y-u), (1-x-y+u): the first and last are anchored at L,
    # the middle two at U.  Clamped at 0 against float rounding below zero.
    offsets = np.maximum(0.0, np.array([L, x - U, y - U, (1.0 - x - y) + L]))
    exponents = np.array([alpha.alpha1, alpha.alpha2, alpha.alpha3, alpha.alpha4]) - 1.0
    # Exponents of factors whose offset vanishes control the endpoint behavior.
    left_alpha = min(
        (e + 1.0 for o, e in zip(offsets[[0, 3]], exponents[[0, 3]]) if o <= 0.0), default=1.0
    )
    right_alpha = min(
        (e + 1.0 for o, e in zip(offsets[[1, 2]], exponents[[1, 2]]) if o <= 0.0), default=1.0
    )
    return L, U, d, offsets, exponents, _t_range(left_alpha, right_alpha)


def _log_factors(t, d: float, offsets: np.ndarray):
    """Log of the four integrand factors at transformed coordinate(s) t.

    Uses u = L + d*sigmoid(2z), z = (pi/2) sinh t, evaluated through log-space
    primitives so that factors remain finite arbitrarily close to the
    endpoints.  Returns (stacked log-factors, log |du/dt|).
    """
    t = np.asarray(t, dtype=float)
    z2 = np.pi * np.sinh(t)
    log_sig = log_expit(z2)
    log_one_minus_sig = log_expit(-z2)
    log_d = np.log(d)
    with np.errstate(divide="ignore"):
        log_off = np.log(offsets)
    # Factors 0 and 3 grow with sigma (left-anchored), 1 and 2 with 1-sigma.
    left = np.logaddexp(log_off[[0, 3]][..., None], log_d + log_sig[None, ...])
    right = np.logaddexp(log_off[[1, 2]][..., None], log_d + log_one_minus_sig[None, ...])
    logf = np.stack([left[0], right[0], right[1], left[1]])
    log_jac = log_d + np.log(np.pi) + np.log(np.cosh(t)) + log_sig + log_one_minus_sig
    return logf, log_jac


def density(alpha: AlphaParams, x: float, y: float, rel_tol: float = 1e-8) -> float:
    """Joint density f(x, y), by adaptive quadrature over Omega.

    The integrand is mapped through a double-exponential substitution that
    clusters nodes at both endpoints of Omega, where it is integrably
    singular whenever some alpha_i < 1, and the transformed integral is
    evaluated with adaptive Gauss-Kronrod quadrature.

    Raises
    ------
    UndefinedDensity
        On the singular set where the defining integral diverges.
    QuadratureFailure
        If the adaptive scheme cannot meet ``rel_tol``.
    """
    _check_point(x, y)
    if not is_density_defined(alpha, x, y):
        raise UndefinedDensity(
            f"density of alpha={tuple(alpha.as_array())} does not exist at ({x}, {y})"
        )
    L, U, d, offsets, exponents, t_max = _integrand_setup(alpha, x, y)
    if d <= DEGENERATE_OMEGA_TOL:
        return 0.0
    log_b = log_beta_const(alpha.as_array())

    def f(t: float) -> float:
        logf, log_jac = _log_factors(t, d, offsets)
        return float(np.exp(exponents @ logf + log_jac - log_b).item())

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, abserr = integrate.quad(
            f, -t_max, t_max, epsabs=1e-300, epsrel=rel_tol * 1e-2, limit=200, full_output=True
        )[:2]
    if abserr > rel_tol * max(abs(value), 1e-300) and abserr > 1e-12:
        raise QuadratureFailure(
            f"quadrature error {abserr:.3e} exceeds tolerance for value {value:.6e} at ({x}, {y})"
        )
    return float(max(value, 0.0))


def density_grid(
    alpha: AlphaParams,
    x: np.ndarray,
    y: np.ndarray,
    rel_tol: float = 1e-6,
    max_level: int = 7,
) -> np.ndarray:
    """Vectorized density over paired arrays of interior points.

    Evaluates the same transformed integrand as :func:`density` on a fixed
    double-exponential grid, doubling the node count until the result is
    stable to ``rel_tol``.  Points on the singular set come back as NaN.
    Intended for grid rendering and for bulk evaluation where per-point
    adaptive quadrature would be too slow.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError("x and y must have matching shapes")
    out = np.empty(x.shape, dtype=float)
    log_b = log_beta_const(alpha.as_array())
    for i in range(x.size):
        xi, yi = float(x.flat[i]), float(y.flat[i])
        if not is_density_defined(alpha, xi, yi):
            out.flat[i] = np.nan
            continue
        L, U, d, offsets, exponents, t_max = _integrand_setup(alpha, xi, yi)
        if d <= DEGENERATE_OMEGA_TOL:
            out.flat[i] = 0.0
            continue
        out.flat[i] = _tanh_sinh_value(d, offsets, exponents, t_max, log_b, rel_tol, max_level)
    return out


def _tanh_sinh_value(
    d: float,
    offsets: np.ndarray,
    exponents: np.ndarray,
    t_max: float,
    log_b: float,
    rel_tol: float,
    max_level: int,
) -> float:
    """Fixed-rule double-exponential sum with successive halving of the step."""

    def rule(h: float, odd_only: bool) -> np.ndarray:
        k = np.arange(-int(np.floor(t_max / h)), int(np.floor(t_max / h)) + 1)
        t = k * h
        if odd_only:
            t = t[np.abs(k) % 2 == 1]
        logf, log_jac = _log_factors(t, d, offsets)
        return np.exp(exponents @ logf + log_jac)

    h = 0.5
    total = rule(h, odd_only=False).sum() * h
    for _ in range(max_level):
        h *= 0.5
        total_new = 0.5 * total + rule(h, odd_only=True).sum() * h
        if abs(total_new - total) <= rel_tol * max(abs(total_new), 1e-300):
            total = total_new
            break
        total = total_new
    return float(total * np.exp(-log_b))


def sample(alpha: AlphaParams, n: int, seed: int) -> PairedSample:
    """Draw n pairs exactly, via four independent gamma variates per pair.

    X = (G1+G2)/(G1+..+G4), Y = (G1+G3)/(G1+..+G4) with Gi ~ Gamma(alpha_i, 1).
    Deterministic given ``seed``; the stream is a counter-based generator so
    parallel callers can derive independent child seeds.
    """
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    rng = rng_from(seed)
    a = alpha.as_array()
    g = rng.gamma(shape=a, size=(n, 4))
    # For very small alpha the variates can underflow to an all-zero row;
    # redraw those rows so the ratio below is defined.
    for _ in range(100):
        s = g.sum(axis=1)
        bad = ~(s > 0.0) | ~np.isfinite(s)
        if not bad.any():
            break
        g[bad] = rng.gamma(shape=a, size=(int(bad.sum()), 4))
    s = g.sum(axis=1)
    x = (g[:, 0] + g[:, 1]) / s
    y = (g[:, 0] + g[:, 2]) / s
    x = np.clip(x, _INTERIOR_CLIP, 1.0 - _INTERIOR_CLIP)
    y = np.clip(y, _INTERIOR_CLIP, 1.0 - _INTERIOR_CLIP)
    return PairedSample(x, y)

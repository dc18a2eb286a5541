"""Latent-variable augmented posterior on an unconstrained space.

Each observation (x_i, y_i) gets one latent u_i, the shared Dirichlet
component, constrained to Omega_i = (L_i, U_i) with L_i = max(0, x_i+y_i-1)
and U_i = min(x_i, y_i).  Augmenting with u makes the per-datum likelihood a
product of four power terms, so the joint log density and its gradient are
closed-form.

Sampling works on the unconstrained variables
    theta_j = log(alpha_j - shift),   w_i = logit((u_i - L_i) / (U_i - L_i)),
with the corresponding log-Jacobian terms added to the target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, expit, gammaln

from ..types import PairedSample
from .priors import PriorSpec


@dataclass(frozen=True)
class AugmentedState:
    """Unconstrained sampler coordinates plus cached per-datum bounds."""

    theta: np.ndarray
    w: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    shift: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.theta.shape != (4,):
            raise ValueError("theta must have 4 entries")
        if not (self.w.shape == self.lower.shape == self.upper.shape):
            raise ValueError("w and the cached bounds must have matching shapes")

    @property
    def alpha(self) -> np.ndarray:
        return self.shift + np.exp(self.theta)

    @property
    def u(self) -> np.ndarray:
        return self.lower + (self.upper - self.lower) * expit(self.w)

    @classmethod
    def from_alpha_u(
        cls, alpha: np.ndarray, u: np.ndarray, data: PairedSample, shift: float = 0.0
    ) -> "AugmentedState":
        lower, upper = latent_bounds(data)
        frac = (np.asarray(u, dtype=float) - lower) / (upper - lower)
        if np.any(frac <= 0.0) or np.any(frac >= 1.0):
            raise ValueError("u must lie strictly inside its per-datum bounds")
        alpha = np.asarray(alpha, dtype=float)
        if np.any(alpha <= shift):
            raise ValueError("alpha must exceed the prior shift")
        w = np.log(frac) - np.log1p(-frac)
        return cls(theta=np.log(alpha - shift), w=w, lower=lower, upper=upper, shift=shift)


def latent_bounds(data: PairedSample) -> tuple[np.ndarray, np.ndarray]:
    """Per-datum latent interval (L_i, U_i)."""
    lower = np.maximum(0.0, data.x + data.y - 1.0)
    upper = np.minimum(data.x, data.y)
    return lower, upper


class AugmentedPosterior:
    """Callable log density and gradient of the augmented model.

    Precomputes everything that depends only on the data so that repeated
    evaluations inside the sampler touch no Python-level bookkeeping.
    """

    def __init__(self, data: PairedSample, prior: PriorSpec):
        if data.n < 1:
            raise ValueError("need at least one observation")
        self.data = data
        self.prior = prior
        self.n = data.n
        self.shift = prior.shift
        self.lower, self.upper = latent_bounds(data)
        self.width = self.upper - self.lower
        self.log_width = np.log(self.width)
        self._log_width_sum = float(self.log_width.sum())
        x, y = data.x, data.y
        # Distance from the integration endpoint to each factor's zero:
        # factors (u), (1-x-y+u) vanish at or below L; (x-u), (y-u) at or above U.
        # Clamped at 0: the algebraic values are nonnegative but the naive
        # float expressions can round to -1e-17.
        self.off_left = np.maximum(0.0, np.stack([self.lower, (1.0 - x - y) + self.lower]))
        self.off_right = np.maximum(0.0, np.stack([x - self.upper, y - self.upper]))
        self.left_anchored = self.off_left == 0.0
        self.right_anchored = self.off_right == 0.0
        # Inlined prior pieces (the sampler calls this object in a tight loop).
        if prior.kind == "gamma":
            self._gamma_prior = True
            self._pa = prior.a
            self._pb = prior.b
            self._prior_const = float((prior.a * np.log(prior.b) - gammaln(prior.a)).sum())
        else:
            self._gamma_prior = False
            self._cutoff = prior.cutoff
            self._lam = prior.rate
            self._log_plateau = float(np.log(prior.mass / prior.cutoff))

    def dim(self) -> int:
        return 4 + self.n

    def pack(self, theta: np.ndarray, w: np.ndarray) -> np.ndarray:
        return np.concatenate([theta, w])

    def unpack(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return q[:4], q[4:]

    def value_and_grad(self, q: np.ndarray) -> tuple[float, np.ndarray]:
        """Log augmented posterior density and its gradient at packed q."""
        theta, w = self.unpack(q)
        alpha = self.shift + np.exp(theta)
        if not np.all(np.isfinite(alpha)):
            return -np.inf, np.zeros_like(q)
        dalpha = alpha - self.shift  # d alpha / d theta

        # Stable sigmoid pieces from one exp: sig, 1-sig and their logs.
        aw = np.abs(w)
        exp_neg = np.exp(-aw)
        denom = 1.0 + exp_neg
        big = 1.0 / denom
        small = exp_neg / denom
        pos = w >= 0.0
        sig = np.where(pos, big, small)
        sig_c = np.where(pos, small, big)
        log1p_term = np.log1p(exp_neg)
        log_big = -log1p_term
        log_small = -aw - log1p_term
        log_sig = np.where(pos, log_big, log_small)
        log_sig_c = np.where(pos, log_small, log_big)

        # log factors: (u, 1-x-y+u) anchored left, (x-u, y-u) anchored right.
        # Direct log where an offset keeps the factor away from zero; log-space
        # composition on the anchored rows, which stays finite for any w.
        with np.errstate(divide="ignore"):
            lf_left = np.where(
                self.left_anchored,
                self.log_width + log_sig,
                np.log(self.off_left + self.width * sig),
            )
            lf_right = np.where(
                self.right_anchored,
                self.log_width + log_sig_c,
                np.log(self.off_right + self.width * sig_c),
            )

        s_alpha = alpha.sum()
        log_b = float(gammaln(alpha).sum() - gammaln(s_alpha))
        e1, e2, e3, e4 = alpha - 1.0
        sums = np.array([lf_left[0].sum(), lf_right[0].sum(), lf_right[1].sum(), lf_left[1].sum()])
        data_term = e1 * sums[0] + e2 * sums[1] + e3 * sums[2] + e4 * sums[3] - self.n * log_b

        # Prior pieces written directly in theta space: the gamma exponent
        # (a-1) log z becomes (a-1) theta, whose derivative stays exact even
        # when exp(theta) underflows at the support boundary.
        if self._gamma_prior:
            prior_term = self._prior_const + float(
                ((self._pa - 1.0) * theta - self._pb * dalpha).sum()
            )
            dprior_theta = (self._pa - 1.0) - self._pb * dalpha
        else:
            above = dalpha > self._cutoff
            prior_term = 4.0 * self._log_plateau - self._lam * float(
                np.where(above, dalpha - self._cutoff, 0.0).sum()
            )
            dprior_theta = np.where(above, -self._lam * dalpha, 0.0)

        jac_theta = float(theta.sum())
        jac_w = self._log_width_sum - float((aw + 2.0 * log1p_term).sum())
        value = float(data_term) + prior_term + jac_theta + jac_w
        if not np.isfinite(value):
            return -np.inf, np.zeros_like(q)

        # theta gradient: chain rule through alpha = shift + exp(theta).
        dlog_b = digamma(alpha) - digamma(s_alpha)
        grad_theta = (sums - self.n * dlog_b) * dalpha + dprior_theta + 1.0

        # w gradient: share of each factor taken by its moving part.
        wsig = self.width * sig
        wsig_c = self.width * sig_c
        with np.errstate(invalid="ignore", divide="ignore"):
            r_left = np.where(self.left_anchored, 1.0, wsig / (self.off_left + wsig))
            r_right = np.where(self.right_anchored, 1.0, wsig_c / (self.off_right + wsig_c))
        grad_w = (
            sig_c * (e1 * r_left[0] + e4 * r_left[1])
            - sig * (e2 * r_right[0] + e3 * r_right[1])
            + (sig_c - sig)
        )
        return value, np.concatenate([grad_theta, grad_w])


def log_augmented_posterior(
    state: AugmentedState, data: PairedSample, prior: PriorSpec
) -> tuple[float, np.ndarray, np.ndarray]:
    """Log density of the augmented posterior and its gradient.

    Returns ``(value, grad_theta, grad_w)`` where the value includes the data
    term, the log prior, and the log-Jacobians of both unconstraining
    transforms.
    """
    post = AugmentedPosterior(data, prior)
    if state.w.shape != data.x.shape:
        raise ValueError("state dimensions do not match the data")
    value, grad = post.value_and_grad(post.pack(state.theta, state.w))
    return value, grad[:4], grad[4:]

"""Dynamic Hamiltonian Monte Carlo with no-U-turn trajectory termination.

A self-contained sampler over an arbitrary differentiable log density:
leapfrog integration with a diagonal mass matrix, multiplicative trajectory
doubling stopped by the no-U-turn criterion, multinomial selection of the
returned state, dual-averaging step-size adaptation toward a target
acceptance statistic, and windowed diagonal mass-matrix estimation during
warmup.  A trajectory leaf whose energy error exceeds the divergence
threshold aborts the doubling and is flagged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

LogpGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]

DIVERGENCE_THRESHOLD = 1000.0
MAX_TREE_DEPTH = 10

# Dual-averaging constants.
_DA_GAMMA = 0.05
_DA_T0 = 10.0
_DA_KAPPA = 0.75


@dataclass
class ChainResult:
    draws: np.ndarray          # (iters, dim) post-warmup states
    accept_stats: np.ndarray   # (iters,)
    divergent: np.ndarray      # (iters,) bool
    step_size: float
    inv_mass: np.ndarray
    warmup_divergences: int


class _Tree:
    """Endpoints, running proposal and weights of a (sub)trajectory."""

    __slots__ = (
        "q_minus", "p_minus", "grad_minus",
        "q_plus", "p_plus", "grad_plus",
        "q_prop", "logp_prop", "grad_prop",
        "log_weight", "sum_accept", "n_leaves", "divergent", "turning",
    )

    def __init__(self, q, p, grad, logp, log_weight, accept, divergent):
        self.q_minus = self.q_plus = self.q_prop = q
        self.p_minus = self.p_plus = p
        self.grad_minus = self.grad_plus = self.grad_prop = grad
        self.logp_prop = logp
        self.log_weight = log_weight
        self.sum_accept = accept
        self.n_leaves = 1
        self.divergent = divergent
        self.turning = False


class NutsSampler:
    def __init__(
        self,
        logp_grad: LogpGrad,
        rng: np.random.Generator,
        max_depth: int = MAX_TREE_DEPTH,
        divergence_threshold: float = DIVERGENCE_THRESHOLD,
    ):
        self.logp_grad = logp_grad
        self.rng = rng
        self.max_depth = max_depth
        self.divergence_threshold = divergence_threshold

    # -- Hamiltonian pieces -------------------------------------------------

    def _kinetic(self, p: np.ndarray, inv_mass: np.ndarray) -> float:
        return 0.5 * float(p @ (inv_mass * p))

    def _leapfrog(self, q, p, grad, eps, inv_mass):
        p_half = p + 0.5 * eps * grad
        q_new = q + eps * inv_mass * p_half
        logp_new, grad_new = self.logp_grad(q_new)
        p_new = p_half + 0.5 * eps * grad_new
        return q_new, p_new, grad_new, logp_new

    def _draw_momentum(self, dim: int, inv_mass: np.ndarray) -> np.ndarray:
        return self.rng.standard_normal(dim) / np.sqrt(inv_mass)

    @staticmethod
    def _uturn(q_plus, q_minus, p_plus, p_minus, inv_mass) -> bool:
        dq = q_plus - q_minus
        return (dq @ (inv_mass * p_minus)) < 0.0 or (dq @ (inv_mass * p_plus)) < 0.0

    # -- Trajectory construction --------------------------------------------

    def _leaf(self, q, p, grad, eps, inv_mass, h0, direction) -> _Tree:
        q1, p1, grad1, logp1 = self._leapfrog(q, p, grad, direction * eps, inv_mass)
        if np.all(np.isfinite(q1)) and np.isfinite(logp1):
            h1 = -logp1 + self._kinetic(p1, inv_mass)
            delta = h1 - h0
        else:
            q1 = np.where(np.isfinite(q1), q1, 0.0)
            delta = np.inf
        divergent = not np.isfinite(delta) or delta > self.divergence_threshold
        log_weight = -delta if not divergent else -np.inf
        accept = float(np.exp(min(0.0, -delta))) if np.isfinite(delta) else 0.0
        return _Tree(q1, p1, grad1, logp1, log_weight, accept, divergent)

    def _build(self, q, p, grad, depth, eps, inv_mass, h0, direction) -> _Tree:
        if depth == 0:
            return self._leaf(q, p, grad, eps, inv_mass, h0, direction)
        first = self._build(q, p, grad, depth - 1, eps, inv_mass, h0, direction)
        if first.divergent or first.turning:
            return first
        tip_q = first.q_plus if direction > 0 else first.q_minus
        tip_p = first.p_plus if direction > 0 else first.p_minus
        tip_grad = first.grad_plus if direction > 0 else first.grad_minus
        second = self._build(tip_q, tip_p, tip_grad, depth - 1, eps, inv_mass, h0, direction)
        # Merge: multinomial choice between the halves, endpoints spanning both.
        total = np.logaddexp(first.log_weight, second.log_weight)
        if np.isfinite(second.log_weight) and np.log(self.rng.random()) < second.log_weight - total:
            first.q_prop = second.q_prop
            first.logp_prop = second.logp_prop
            first.grad_prop = second.grad_prop
        first.log_weight = total
        first.sum_accept += second.sum_accept
        first.n_leaves += second.n_leaves
        first.divergent = second.divergent
        if direction > 0:
            first.q_plus, first.p_plus, first.grad_plus = second.q_plus, second.p_plus, second.grad_plus
        else:
            first.q_minus, first.p_minus, first.grad_minus = second.q_minus, second.p_minus, second.grad_minus
        first.turning = second.turning or (
            not first.divergent
            and self._uturn(first.q_plus, first.q_minus, first.p_plus, first.p_minus, inv_mass)
        )
        return first

    def transition(self, q, logp, grad, eps, inv_mass):
        """One NUTS update; returns (q, logp, grad, accept_stat, divergent)."""
        dim = q.size
        p0 = self._draw_momentum(dim, inv_mass)
        h0 = -logp + self._kinetic(p0, inv_mass)
        tree = _Tree(q, p0, grad, logp, 0.0, 1.0, False)
        tree.n_leaves = 0
        tree.sum_accept = 0.0
        divergent = False
        for _ in range(self.max_depth):
            direction = 1 if self.rng.random() < 0.5 else -1
            tip_q = tree.q_plus if direction > 0 else tree.q_minus
            tip_p = tree.p_plus if direction > 0 else tree.p_minus
            tip_grad = tree.grad_plus if direction > 0 else tree.grad_minus
            sub = self._build(
                tip_q, tip_p, tip_grad, _depth_of(tree.n_leaves + 1), eps, inv_mass, h0, direction
            )
            tree.sum_accept += sub.sum_accept
            tree.n_leaves += sub.n_leaves
            if sub.divergent:
                divergent = True
                break
            if sub.turning:
                break
            # Biased progressive sampling favoring the fresh half.
            if np.log(self.rng.random()) < sub.log_weight - tree.log_weight:
                tree.q_prop = sub.q_prop
                tree.logp_prop = sub.logp_prop
                tree.grad_prop = sub.grad_prop
            tree.log_weight = np.logaddexp(tree.log_weight, sub.log_weight)
            if direction > 0:
                tree.q_plus, tree.p_plus, tree.grad_plus = sub.q_plus, sub.p_plus, sub.grad_plus
            else:
                tree.q_minus, tree.p_minus, tree.grad_minus = sub.q_minus, sub.p_minus, sub.grad_minus
            if self._uturn(tree.q_plus, tree.q_minus, tree.p_plus, tree.p_minus, inv_mass):
                break
        accept_stat = tree.sum_accept / max(tree.n_leaves, 1)
        return tree.q_prop, tree.logp_prop, tree.grad_prop, accept_stat, divergent

    # -- Step-size search ----------------------------------------------------

    def find_initial_step(self, q, logp, grad, inv_mass) -> float:
        eps = 1.0
        p = self._draw_momentum(q.size, inv_mass)
        h0 = -logp + self._kinetic(p, inv_mass)

        def log_ratio(eps_try: float) -> float:
            _, p1, _, logp1 = self._leapfrog(q, p, grad, eps_try, inv_mass)
            if not np.isfinite(logp1):
                return -np.inf
            return h0 - (-logp1 + self._kinetic(p1, inv_mass))

        direction = 1.0 if log_ratio(eps) > np.log(0.5) else -1.0
        for _ in range(100):
            if direction * log_ratio(eps) <= direction * np.log(0.5):
                break
            eps *= 2.0**direction
            if not np.isfinite(eps) or eps < 1e-10:
                eps = max(min(eps, 1.0), 1e-10)
                break
        return eps


def _depth_of(n_leaves: int) -> int:
    return max(int(n_leaves).bit_length() - 1, 0)


@dataclass
class _DualAveraging:
    mu: float
    target: float
    log_eps_bar: float = 0.0
    h_bar: float = 0.0
    count: int = 0

    @classmethod
    def start(cls, eps: float, target: float) -> "_DualAveraging":
        return cls(mu=float(np.log(10.0 * eps)), target=target)

    def update(self, accept_stat: float) -> float:
        self.count += 1
        m = self.count
        frac = 1.0 / (m + _DA_T0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_stat)
        log_eps = self.mu - np.sqrt(m) / _DA_GAMMA * self.h_bar
        decay = m ** (-_DA_KAPPA)
        self.log_eps_bar = decay * log_eps + (1.0 - decay) * self.log_eps_bar
        return float(np.exp(log_eps))

    def adapted(self) -> float:
        return float(np.exp(self.log_eps_bar))


def _mass_windows(warmup: int) -> list[tuple[int, int]]:
    """Stan-style expanding (start, end) windows for variance estimation."""
    if warmup < 40:
        return []
    init_buffer, term_buffer, base = 75, 50, 25
    if init_buffer + base + term_buffer > warmup:
        init_buffer = int(0.15 * warmup)
        term_buffer = int(0.10 * warmup)
        base = warmup - init_buffer - term_buffer
    windows = []
    start, size = init_buffer, base
    while True:
        end = start + size
        if end + 2 * size + term_buffer > warmup:
            end = warmup - term_buffer
            windows.append((start, end))
            break
        windows.append((start, end))
        start, size = end, 2 * size
    return windows


def run_chain(
    logp_grad: LogpGrad,
    q0: np.ndarray,
    rng: np.random.Generator,
    warmup: int,
    iters: int,
    target_accept: float = 0.9,
    max_depth: int = MAX_TREE_DEPTH,
    divergence_threshold: float = DIVERGENCE_THRESHOLD,
    adapt: bool = True,
    step_size: Optional[float] = None,
    inv_mass: Optional[np.ndarray] = None,
) -> ChainResult:
    """Run one chain: ``warmup`` adaptation steps then ``iters`` kept draws.

    With ``adapt=False`` the supplied ``step_size`` and ``inv_mass`` are used
    unchanged, which yields a fixed-kernel chain suitable for exactness tests.
    """
    q = np.asarray(q0, dtype=float).copy()
    dim = q.size
    inv_mass = np.ones(dim) if inv_mass is None else np.asarray(inv_mass, dtype=float).copy()
    sampler = NutsSampler(logp_grad, rng, max_depth, divergence_threshold)
    logp, grad = logp_grad(q)
    if not np.isfinite(logp):
        raise ValueError("initial point has non-finite log density")

    if adapt:
        eps = sampler.find_initial_step(q, logp, grad, inv_mass)
        da = _DualAveraging.start(eps, target_accept)
    else:
        if step_size is None:
            raise ValueError("step_size is required when adapt=False")
        eps = float(step_size)
        da = None

    windows = _mass_windows(warmup) if adapt else []
    window_idx = 0
    welford_n = 0
    welford_mean = np.zeros(dim)
    welford_m2 = np.zeros(dim)
    warmup_divergences = 0

    for m in range(warmup):
        q, logp, grad, accept_stat, divergent = sampler.transition(q, logp, grad, eps, inv_mass)
        warmup_divergences += int(divergent)
        if da is not None:
            eps = da.update(accept_stat)
        if window_idx < len(windows):
            start, end = windows[window_idx]
            if start <= m < end:
                welford_n += 1
                delta = q - welford_mean
                welford_mean += delta / welford_n
                welford_m2 += delta * (q - welford_mean)
            if m == end - 1:
                var = welford_m2 / max(welford_n - 1, 1)
                inv_mass = var * (welford_n / (welford_n + 5.0)) + 1e-3 * (5.0 / (welford_n + 5.0))
                window_idx += 1
                welford_n = 0
                welford_mean = np.zeros(dim)
                welford_m2 = np.zeros(dim)
                eps = sampler.find_initial_step(q, logp, grad, inv_mass)
                da = _DualAveraging.start(eps, target_accept)
    if da is not None and warmup > 0:
        eps = da.adapted()

    draws = np.empty((iters, dim))
    accept_stats = np.empty(iters)
    divergent_flags = np.zeros(iters, dtype=bool)
    for m in range(iters):
        q, logp, grad, accept_stat, divergent = sampler.transition(q, logp, grad, eps, inv_mass)
        draws[m] = q
        accept_stats[m] = accept_stat
        divergent_flags[m] = divergent
    return ChainResult(
        draws=draws,
        accept_stats=accept_stats,
        divergent=divergent_flags,
        step_size=eps,
        inv_mass=inv_mass,
        warmup_divergences=warmup_divergences,
    )

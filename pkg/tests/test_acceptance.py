"""Acceptance suite: one test per release criterion, at its stated tolerance.

Each test prints a single [PASS]/[FAIL] line (run with ``pytest -s`` to see
them live).  Criteria marked with runtime budgets also assert the budget.
"""

import time

import numpy as np
import pytest
from scipy import stats
from scipy.special import expit

from bibeta._rng import derive_seed, rng_from
from bibeta.bayes import AugmentedPosterior, HmcConfig, PriorSpec, sbc
from bibeta.core import density, density_grid, moments_of, sample, solve_four_moments
from bibeta.diagnostics import gn_test, m_test
from bibeta.errors import InfeasibleVariance
from bibeta.experiments import (
    ExperimentSpec,
    GENERATOR_BIVARIATE_BETA,
    GENERATOR_LOGIT_NORMAL,
    GeneratorSpec,
    run_misspecified,
    run_well_specified,
    sampling_distribution,
    time_methods,
)
from bibeta.types import AlphaParams


def report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def test_moment_round_trip():
    rng = np.random.default_rng(20770)
    start = time.perf_counter()
    max_err = 0.0
    for _ in range(1000):
        alpha = rng.uniform(0.2, 10.0, size=4)
        m = moments_of(AlphaParams.from_array(alpha))
        out = solve_four_moments(m.m1, m.m2, m.v1, m.rho)
        max_err = max(max_err, float(np.abs(out.alpha - alpha).max()))
    elapsed = time.perf_counter() - start
    report(
        "moment-round-trip",
        max_err < 1e-9 and elapsed < 1.0,
        f"max_err={max_err:.2e} runtime={elapsed:.2f}s",
    )


def _unit_square_mass(alpha: AlphaParams, h: float = 0.15, t_max: float = 3.8) -> float:
    """Tensor quadrature of the density split along its two interior kinks."""
    k = np.arange(-int(t_max / h), int(t_max / h) + 1)
    z2 = np.pi * np.sinh(k * h)
    sig = expit(z2)
    w = h * np.pi * np.cosh(k * h) * sig * expit(-z2)
    keep = (sig > 0.0) & (sig < 1.0)
    sig, w = sig[keep], w[keep]
    total = 0.0
    for xa, xb in [(0.0, 0.5), (0.5, 1.0)]:
        xs = xa + (xb - xa) * sig
        wx = (xb - xa) * w
        for xi, wxi in zip(xs, wx):
            b1, b2 = min(xi, 1 - xi), max(xi, 1 - xi)
            inner = 0.0
            for ya, yb in [(0.0, b1), (b1, b2), (b2, 1.0)]:
                if yb - ya < 1e-14:
                    continue
                ys = ya + (yb - ya) * sig
                wy = (yb - ya) * w
                ok = (ys > 0) & (ys < 1) & (np.abs(ys - xi) > 1e-11) & (np.abs(ys + xi - 1) > 1e-11)
                vals = density_grid(alpha, np.full(int(ok.sum()), xi), ys[ok], rel_tol=1e-7)
                inner += float(vals @ wy[ok])
            total += wxi * inner
    return total


def test_density_normalization():
    start = time.perf_counter()
    errors = {}
    for coords in [(2, 3, 4, 5), (1.5, 1.5, 1.5, 1.5), (2, 7, 3, 1)]:
        mass = _unit_square_mass(AlphaParams(*coords))
        errors[coords] = abs(mass - 1.0)
    elapsed = time.perf_counter() - start
    worst = max(errors.values())
    report(
        "density-normalization",
        worst < 1e-3 and elapsed < 30.0,
        f"worst |mass-1|={worst:.2e} runtime={elapsed:.1f}s",
    )


def test_density_analytic_spot_check():
    value = density(AlphaParams(1, 1, 1, 1), 0.5, 0.25)
    report("density-spot-check", abs(value - 1.5) < 1e-6, f"f(0.5,0.25)={value:.9f}")


def test_sampling_correctness():
    alpha = AlphaParams(2, 7, 3, 1)
    n = 100000
    data = sample(alpha, n, 314159)
    m = moments_of(alpha)
    x, y = data.x, data.y
    checks = []

    def within(label, observed, expected, se):
        checks.append((label, abs(observed - expected) < 3 * se))

    within("m1", x.mean(), m.m1, x.std() / np.sqrt(n))
    within("m2", y.mean(), m.m2, y.std() / np.sqrt(n))
    dx, dy = x - x.mean(), y - y.mean()
    v1_inf = dx**2 - dx.var()
    v2_inf = dy**2 - dy.var()
    within("v1", x.var(ddof=1), m.v1, v1_inf.std() / np.sqrt(n))
    within("v2", y.var(ddof=1), m.v2, v2_inf.std() / np.sqrt(n))
    r = float(np.corrcoef(x, y)[0, 1])
    zx, zy = dx / x.std(), dy / y.std()
    rho_inf = zx * zy - 0.5 * r * (zx**2 + zy**2)
    within("rho", r, m.rho, rho_inf.std() / np.sqrt(n))
    ks_x = stats.kstest(x, "beta", args=(9, 4)).pvalue
    ks_y = stats.kstest(y, "beta", args=(5, 8)).pvalue
    ok = all(flag for _, flag in checks) and ks_x > 0.01 and ks_y > 0.01
    failed = [label for label, flag in checks if not flag]
    report(
        "sampling-correctness",
        ok,
        f"moments outside 3SE: {failed or 'none'}; KS p=({ks_x:.3f}, {ks_y:.3f})",
    )


def test_table_a1_desk_scale():
    start = time.perf_counter()
    spec = ExperimentSpec(
        generator=GeneratorSpec(kind=GENERATOR_BIVARIATE_BETA, alpha=AlphaParams(1, 1, 1, 1)),
        n=200,
        reps=200,
        methods=("mm1",),
        bootstrap=200,
        seed=1001,
    )
    table = run_well_specified(spec)
    mapes = [table.metric("mm1", t, "mape") for t in table.targets]
    coverages = [table.metric("mm1", t, "coverage") for t in table.targets]
    elapsed = time.perf_counter() - start
    ok = (
        all(0.07 <= v <= 0.14 for v in mapes)
        and all(0.90 <= c <= 0.98 for c in coverages)
        and elapsed < 600.0
    )
    report(
        "table-a1-desk-scale",
        ok,
        f"MAPE={np.round(mapes, 3).tolist()} coverage={np.round(coverages, 3).tolist()} runtime={elapsed:.0f}s",
    )


def test_table_a2_sign_reproduction():
    start = time.perf_counter()
    spec = ExperimentSpec(
        generator=GeneratorSpec(kind=GENERATOR_BIVARIATE_BETA, alpha=AlphaParams(2, 7, 3, 1)),
        n=50,
        reps=100,
        methods=("be1",),
        bootstrap=0,
        hmc=HmcConfig(chains=2, warmup=500, iters=500),
        seed=2002,
    )
    table = run_well_specified(spec)
    bias_a2 = table.metric("be1", "alpha2", "bias")
    cov_a1 = table.metric("be1", "alpha1", "coverage")
    cov_a2 = table.metric("be1", "alpha2", "coverage")
    elapsed = time.perf_counter() - start
    ok = bias_a2 < 0 and cov_a2 < cov_a1 and elapsed < 1800.0
    report(
        "table-a2-sign-reproduction",
        ok,
        f"bias(alpha2)={bias_a2:.3f} coverage(alpha1)={cov_a1:.2f} coverage(alpha2)={cov_a2:.2f} "
        f"runtime={elapsed:.0f}s",
    )


EXP1 = GeneratorSpec(
    kind=GENERATOR_LOGIT_NORMAL, mu=np.array([0.0, 0.0]), sigma=np.array([[1.0, 0.1], [0.1, 1.0]])
)
EXP2 = GeneratorSpec(
    kind=GENERATOR_LOGIT_NORMAL, mu=np.array([-1.0, -1.0]), sigma=np.array([[2.25, -1.2], [-1.2, 1.0]])
)


def test_misspecified_experiment_one():
    spec = ExperimentSpec(generator=EXP1, n=50, reps=200, methods=("mm1",), bootstrap=0, seed=3003)
    table = run_misspecified(spec)
    rho_mape = table.metric("mm1", "rho", "mape")
    dist = sampling_distribution("pn", EXP1, n=50, reps=2000, seed=3103)
    prob = dist.prob_outside
    ok = rho_mape > 1.0 and 0.45 <= prob <= 0.55
    report(
        "misspecified-experiment-1",
        ok,
        f"rho MAPE={rho_mape:.2f} P(Pn outside [0,0.2])={prob:.3f}",
    )


def test_misspecified_experiment_two():
    spec = ExperimentSpec(
        generator=EXP2, n=50, reps=200, methods=("mm1", "mm2", "mm3"), bootstrap=0, seed=4004
    )
    table = run_misspecified(spec)
    b1 = abs(table.metric("mm3", "m1", "bias"))
    b2 = abs(table.metric("mm3", "m2", "bias"))
    mm1_v2 = table.metric("mm1", "v2", "mape")
    mm2_v2 = table.metric("mm2", "v2", "mape")
    ok = b1 < 0.01 and b2 < 0.01 and mm1_v2 > mm2_v2
    report(
        "misspecified-experiment-2",
        ok,
        f"|MM3 mean bias|=({b1:.4f},{b2:.4f}) v2 MAPE MM1={mm1_v2:.2f} > MM2={mm2_v2:.2f}",
    )


def test_gn_calibration():
    alpha = AlphaParams(2, 3, 7, 1)
    p_values = []
    for r in range(500):
        data = sample(alpha, 200, derive_seed(5005, r))
        p_values.append(gn_test(data).p_value)
    p_values = np.array(p_values)
    size = float((p_values <= 0.05).mean())
    ks_uniform_p = stats.kstest(p_values, "uniform").pvalue

    z_values = []
    for r in range(1000):
        data = sample(alpha, 30, derive_seed(5105, r))
        z_values.append(gn_test(data).z)
    ks_normal_dist = stats.kstest(z_values, "norm").statistic
    ok = 0.02 <= size <= 0.09 and ks_uniform_p > 0.01 and ks_normal_dist < 0.08
    report(
        "gn-calibration",
        ok,
        f"size={size:.3f} KS-uniform p={ks_uniform_p:.3f} KS(z, normal)={ks_normal_dist:.3f}",
    )


def test_m_test_size():
    rejections = valid = dropped = 0
    for r in range(500):
        alpha = AlphaParams.from_array(rng_from(6006, r).uniform(0.01, 0.5, 4))
        data = sample(alpha, 50, derive_seed(6006, r, 1))
        try:
            rep = m_test(data, c=-0.05)
        except InfeasibleVariance:
            dropped += 1
            continue
        valid += 1
        rejections += int(rep.reject)
    rate = rejections / valid
    report(
        "m-test-size",
        rate <= 0.08,
        f"rejection rate={rate:.3f} over {valid} valid replications ({dropped} dropped)",
    )


def test_gradient_check():
    data = sample(AlphaParams(2, 1, 0.7, 1.3), 20, 7007)
    post = AugmentedPosterior(data, PriorSpec.gamma_iid(1.0, 1.0))
    rng = np.random.default_rng(7007)
    worst = 0.0
    for _ in range(100):
        q = np.concatenate([rng.uniform(-1, 1, 4), rng.normal(0.0, 1.5, 20)])
        _, grad = post.value_and_grad(q)
        num = np.zeros_like(q)
        for i in range(q.size):
            qp, qm = q.copy(), q.copy()
            qp[i] += 1e-6
            qm[i] -= 1e-6
            num[i] = (post.value_and_grad(qp)[0] - post.value_and_grad(qm)[0]) / 2e-6
        worst = max(worst, float(np.linalg.norm(grad - num) / np.linalg.norm(num)))
    report("gradient-check", worst < 1e-5, f"worst relative error={worst:.2e}")


def test_sbc_uniformity():
    start = time.perf_counter()
    prior = PriorSpec.gamma_iid(1.0, 1.0, shift=0.5)
    config = HmcConfig(chains=1, warmup=500, iters=475)
    rep = sbc(prior, n=50, L=19, N=200, config=config, seed=8008)
    elapsed = time.perf_counter() - start
    ok = bool(np.all(rep.p_values > 0.005)) and elapsed < 7200.0
    report(
        "sbc-uniformity",
        ok,
        f"chi2 p={np.round(rep.p_values, 4).tolist()} failed={rep.failed} runtime={elapsed:.0f}s",
    )


def test_runtime_ordering():
    times = time_methods(AlphaParams(2, 7, 3, 1), 50, repeats=30, seed=9009)
    ok = times["mm1"] < times["mm4"] and times["mm2"] < times["mm4"]
    report(
        "runtime-ordering",
        ok,
        f"median seconds: mm1={times['mm1']:.2e} mm2={times['mm2']:.2e} mm4={times['mm4']:.2e}",
    )

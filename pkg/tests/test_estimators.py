import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from bibeta.core import moments_of, sample, solve_four_moments
from bibeta.errors import InfeasibleVariance, ZeroVariance
from bibeta.estimators import (
    BootstrapCI,
    EstimateReport,
    bootstrap_ci,
    empirical_moments,
    estimate,
    mm1,
    mm2,
    mm3,
    mm4,
)
from bibeta.types import AlphaParams, MomentSummary, PairedSample


def summary(m1, m2, v1, v2, rho):
    return MomentSummary(m1, m2, v1, v2, rho)


class TestEmpiricalMoments:
    def test_two_point_hand_computation(self):
        s = PairedSample(np.array([0.2, 0.4]), np.array([0.6, 0.8]))
        m = empirical_moments(s)
        assert m.m1 == pytest.approx(0.3, rel=1e-14)
        assert m.m2 == pytest.approx(0.7, rel=1e-14)
        assert m.v1 == pytest.approx(0.02, rel=1e-12)
        assert m.v2 == pytest.approx(0.02, rel=1e-12)
        assert m.rho == pytest.approx(1.0, abs=1e-12)

    def test_identical_coordinates_give_unit_correlation(self):
        x = np.array([0.1, 0.4, 0.8, 0.33])
        m = empirical_moments(PairedSample(x, x))
        assert m.rho == pytest.approx(1.0, abs=1e-12)

    def test_constant_sample_raises(self):
        x = np.full(5, 0.4)
        with pytest.raises(ZeroVariance):
            empirical_moments(PairedSample(x, np.linspace(0.1, 0.9, 5)))

    def test_requires_two_points(self):
        with pytest.raises(ValueError):
            empirical_moments(PairedSample(np.array([0.5]), np.array([0.5])))


class TestMM1:
    def test_matches_analytic_solution(self):
        rep = mm1(summary(0.5, 0.5, 0.05, 0.05, 0.0))
        np.testing.assert_allclose(rep.alpha_hat, np.ones(4), rtol=1e-12)
        assert not rep.clamped.any()

    def test_equals_solver_before_clamping(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            m1_, m2_ = rng.uniform(0.1, 0.9, 2)
            v1 = rng.uniform(0.05, 0.95) * m1_ * (1 - m1_)
            rho = rng.uniform(-1, 1)
            out = solve_four_moments(m1_, m2_, v1, rho)
            rep = mm1(summary(m1_, m2_, v1, 0.01, rho))
            np.testing.assert_allclose(rep.alpha_hat, np.maximum(out.alpha, 0.0), rtol=1e-12)
            assert np.array_equal(rep.clamped, out.alpha <= 0)

    def test_exactly_one_clamp_when_rho_infeasible(self):
        rep = mm1(summary(0.9, 0.1, 0.01, 0.01, 0.5))
        assert rep.clamped.sum() == 1
        assert rep.alpha_hat.min() == 0.0

    def test_infeasible_variance(self):
        with pytest.raises(InfeasibleVariance):
            mm1(summary(0.5, 0.5, 0.3, 0.05, 0.0))

    def test_consistency_at_large_n(self):
        data = sample(AlphaParams(1, 1, 1, 1), 100000, 77)
        rep = mm1(empirical_moments(data))
        np.testing.assert_allclose(rep.alpha_hat, np.ones(4), atol=0.1)


class TestMM2:
    def test_symmetric_exact(self):
        rep = mm2(summary(0.5, 0.5, 0.05, 0.05, 0.0))
        np.testing.assert_allclose(rep.alpha_hat, np.ones(4), rtol=1e-12)

    def test_population_fixed_point(self):
        m = moments_of(AlphaParams(2, 7, 3, 1))
        rep = mm2(m)
        np.testing.assert_allclose(rep.alpha_hat, [2, 7, 3, 1], atol=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(
        st.floats(0.1, 0.9),
        st.floats(0.1, 0.9),
        st.floats(0.1, 0.9),
        st.floats(0.1, 0.9),
        st.floats(0.01, 0.99),
    )
    def test_positive_correlation_keeps_outer_coordinates(self, m1_, m2_, f1, f2, rho):
        rep = mm2(summary(m1_, m2_, f1 * m1_ * (1 - m1_), f2 * m2_ * (1 - m2_), rho))
        assert rep.alpha_hat[0] > 0 and not rep.clamped[0]
        assert rep.alpha_hat[3] > 0 and not rep.clamped[3]

    @settings(max_examples=100, deadline=None)
    @given(
        st.floats(0.1, 0.9),
        st.floats(0.1, 0.9),
        st.floats(0.1, 0.9),
        st.floats(0.1, 0.9),
        st.floats(-0.99, -0.01),
    )
    def test_negative_correlation_keeps_inner_coordinates(self, m1_, m2_, f1, f2, rho):
        rep = mm2(summary(m1_, m2_, f1 * m1_ * (1 - m1_), f2 * m2_ * (1 - m2_), rho))
        assert rep.alpha_hat[1] > 0 and not rep.clamped[1]
        assert rep.alpha_hat[2] > 0 and not rep.clamped[2]


class TestMM3:
    def test_truth_zeroes_objective(self):
        rep = mm3(moments_of(AlphaParams(1, 1, 1, 1)))
        np.testing.assert_allclose(rep.alpha_hat, np.ones(4), atol=1e-4)
        assert rep.objective < 1e-10

    def test_population_fixed_point(self):
        rep = mm3(moments_of(AlphaParams(2, 7, 3, 1)))
        np.testing.assert_allclose(rep.alpha_hat, [2, 7, 3, 1], atol=1e-4)

    def test_misspecified_target_matches_means_exactly(self):
        rep = mm3(summary(0.33, 0.30, 0.062, 0.033, -0.73))
        implied = moments_of(rep.as_alpha_params())
        assert implied.m1 == pytest.approx(0.33, abs=1e-8)
        assert implied.m2 == pytest.approx(0.30, abs=1e-8)


class TestMM4:
    def test_truth_zeroes_objective(self):
        rep = mm4(moments_of(AlphaParams(1, 1, 1, 1)))
        np.testing.assert_allclose(rep.alpha_hat, np.ones(4), atol=1e-3)
        assert rep.objective < 1e-8

    def test_population_fixed_point(self):
        rep = mm4(moments_of(AlphaParams(0.7, 0.9, 2.0, 1.5)))
        np.testing.assert_allclose(rep.alpha_hat, [0.7, 0.9, 2.0, 1.5], atol=1e-3)

    def test_concentration_bound_and_positivity_on_data(self):
        rng_seeds = [3, 5, 8]
        for seed in rng_seeds:
            data = sample(AlphaParams(2, 7, 3, 1), 60, seed)
            m = empirical_moments(data)
            rep = mm4(m)
            bound = max(m.m1 * (1 - m.m1) / m.v1, m.m2 * (1 - m.m2) / m.v2) - 1.0
            assert rep.alpha_hat.sum() <= bound * (1 + 1e-12)
            assert rep.alpha_hat.min() > 0


class TestBootstrap:
    def test_deterministic_given_seed(self):
        data = sample(AlphaParams(1, 1, 1, 1), 80, 4)
        ci1 = bootstrap_ci(data, "mm1", B=50, seed=12)
        ci2 = bootstrap_ci(data, "mm1", B=50, seed=12)
        assert np.array_equal(ci1.lower, ci2.lower)
        assert np.array_equal(ci1.resample_estimates, ci2.resample_estimates)

    def test_degenerate_sample_propagates_zero_variance(self):
        x = np.full(10, 0.4)
        y = np.full(10, 0.6)
        with pytest.raises(ZeroVariance):
            bootstrap_ci(PairedSample(x, y), "mm1", B=20, seed=1)

    def test_interval_brackets_resample_median(self):
        data = sample(AlphaParams(2, 7, 3, 1), 100, 9)
        ci = bootstrap_ci(data, "mm2", B=200, seed=2)
        med = np.median(ci.resample_estimates, axis=0)
        assert np.all(ci.lower <= med) and np.all(med <= ci.upper)

    def test_outer_coordinates_positively_correlated(self):
        # resampled estimates of the first and last coordinates co-move
        data = sample(AlphaParams(2, 3, 7, 1), 50, 31)
        ci = bootstrap_ci(data, "mm1", B=500, seed=17)
        r, p = stats.pearsonr(ci.resample_estimates[:, 0], ci.resample_estimates[:, 3])
        assert r > 0
        assert p / 2 < 0.05

    def test_unknown_method_rejected(self):
        data = sample(AlphaParams(1, 1, 1, 1), 20, 4)
        with pytest.raises(ValueError):
            bootstrap_ci(data, "be1", B=10, seed=0)


class TestReports:
    def test_estimate_report_json_round_trip(self):
        rep = EstimateReport(
            alpha_hat=np.array([1.0, 0.0, 2.0, 3.0]),
            method="mm1",
            clamped=np.array([False, True, False, False]),
            interval=np.array([[0.5, 1.5], [0.0, 0.1], [1.0, 3.0], [2.0, 4.0]]),
        )
        back = EstimateReport.from_json(rep.to_json())
        assert back.method == rep.method
        np.testing.assert_array_equal(back.alpha_hat, rep.alpha_hat)
        np.testing.assert_array_equal(back.clamped, rep.clamped)
        np.testing.assert_array_equal(back.interval, rep.interval)

    def test_positivity_floor(self):
        rep = EstimateReport(
            alpha_hat=np.array([0.0, 1.0, 1.0, 1.0]),
            method="mm1",
            clamped=np.array([True, False, False, False]),
        )
        params = rep.as_alpha_params()
        assert params.alpha1 == pytest.approx(1e-10)

    def test_negative_estimates_rejected(self):
        with pytest.raises(ValueError):
            EstimateReport(
                alpha_hat=np.array([-0.1, 1.0, 1.0, 1.0]),
                method="mm1",
                clamped=np.zeros(4, dtype=bool),
            )

    def test_resamples_csv_header(self):
        ci = BootstrapCI(
            lower=np.zeros(4),
            upper=np.ones(4),
            level=0.95,
            B=2,
            resample_estimates=np.array([[1.0, 2.0, 3.0, 4.0], [2.0, 3.0, 4.0, 5.0]]),
        )
        assert ci.resamples_csv().splitlines()[0] == "alpha1,alpha2,alpha3,alpha4"

    def test_estimate_dispatch(self):
        data = sample(AlphaParams(1, 1, 1, 1), 50, 3)
        assert estimate(data, "mm1").method == "mm1"
        with pytest.raises(ValueError):
            estimate(data, "nope")

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gofdro import (
    ConfigurationError,
    DomainError,
    DiscretePMF,
    SampleSet,
    SupportSpec,
    asymptotic_threshold_discrete,
    bootstrap_threshold,
    chi2_quantile,
    discrete_statistic,
    edf_statistic,
    lcx_bootstrap_threshold,
    lcx_statistic,
    lcx_vc_threshold,
    mc_threshold_discrete,
    mc_threshold_edf,
    moment_statistic,
    sos_statistic,
    student_t_quantile,
)
from gofdro.gof import minimal_edf_statistic


def pmf(probs, atoms=None):
    probs = np.asarray(probs, dtype=float)
    if atoms is None:
        atoms = np.arange(len(probs), dtype=float)
    return DiscretePMF(support=SupportSpec.discrete(atoms), probs=probs)


class TestEdfStatistics:
    def test_ks_single_point(self):
        assert edf_statistic("ks", [0.5]) == pytest.approx(0.5)

    def test_ks_hand_evaluation(self):
        # i=1: max(1/2 - 0.1, 0.1 - 0) = 0.4 ; i=2: max(1 - 0.6, 0.6 - 1/2) = 0.4
        assert edf_statistic("ks", [0.1, 0.6]) == pytest.approx(0.4)

    @pytest.mark.parametrize("N", [1, 2, 5, 17])
    def test_midpoint_anchors(self, N):
        mids = (2 * np.arange(1, N + 1) - 1) / (2 * N)
        assert edf_statistic("ks", mids) == pytest.approx(1 / (2 * N))
        assert edf_statistic("kuiper", mids) == pytest.approx(1 / N)
        assert edf_statistic("cvm", mids) == pytest.approx(1 / (2 * N * math.sqrt(3)))

    def test_ad_domain_error(self):
        with pytest.raises(DomainError):
            edf_statistic("ad", [0.0, 0.5])

    def test_unsorted_rejected(self):
        with pytest.raises(DomainError):
            edf_statistic("ks", [0.6, 0.1])

    @given(st.lists(st.floats(min_value=1e-6, max_value=1 - 1e-6), min_size=1, max_size=40))
    @settings(max_examples=200, deadline=None)
    def test_statistic_inequalities(self, raw):
        u = np.sort(np.asarray(raw))
        d = edf_statistic("ks", u)
        v = edf_statistic("kuiper", u)
        w = edf_statistic("cvm", u)
        uu = edf_statistic("watson", u)
        a = edf_statistic("ad", u)
        assert v <= 2 * d + 1e-12
        assert uu <= w + 1e-12
        assert min(d, v, w, uu, a) >= 0.0


class TestDiscreteStatistics:
    def test_perfect_fit(self):
        p = pmf([0.5, 0.3, 0.2])
        assert discrete_statistic("chi2", p, p) == 0.0
        assert discrete_statistic("gtest", p, p) == 0.0

    def test_chi2_hand_value(self):
        phat = pmf([0.5, 0.3, 0.2])
        p0 = pmf([1 / 3, 1 / 3, 1 / 3])
        assert discrete_statistic("chi2", p0, phat) == pytest.approx(math.sqrt(0.14), abs=1e-6)

    def test_gtest_single_term(self):
        phat = pmf([1.0, 0.0])
        p0 = pmf([0.5, 0.5])
        assert discrete_statistic("gtest", p0, phat) == pytest.approx(math.sqrt(2 * math.log(2)), abs=1e-6)

    def test_chi2_zero_cell_rejects(self):
        phat = pmf([0.5, 0.5])
        p0 = pmf([1.0, 0.0])
        assert discrete_statistic("chi2", p0, phat) == float("inf")


class TestMomentStatistics:
    def test_zero_at_sample_mean(self):
        data = SampleSet.from_data([1.0, 2.0, 3.0])
        assert moment_statistic(data, "identity", 2.0) == 0.0

    def test_identity_hand_value(self):
        data = SampleSet.from_data([1.0, 2.0, 3.0])
        assert moment_statistic(data, "identity", 0.0) == pytest.approx(2.0)

    def test_square_hand_value(self):
        data = SampleSet.from_data([1.0, 2.0, 3.0])
        assert moment_statistic(data, "square", 5.0) == pytest.approx(abs(5 - 14 / 3))

    def test_sos_hand_value(self):
        data = SampleSet.from_data(np.array([[0.0, 0.0], [3.0, 4.0]]))
        assert sos_statistic(data, 10.0) == pytest.approx(2.5)

    def test_sos_reduces_to_signed_square_moment(self):
        data = SampleSet.from_data([1.0, 2.0, 3.0])
        assert sos_statistic(data, 4.0) == pytest.approx(14 / 3 - 4.0)


class TestLcxStatistic:
    def test_self_test_is_zero(self):
        data = SampleSet.from_data([0.3, -1.2, 0.8, 2.0])
        f0 = pmf(np.full(4, 0.25), atoms=data.values)
        assert abs(lcx_statistic(data, f0, delta=1e-3)) <= 1e-3

    def test_point_mass_vertex(self):
        # data {0} vs point mass at 1: optimum at (a, b) = (1, 0) with value 1
        data = SampleSet.from_data([0.0])
        f0 = pmf([1.0], atoms=[1.0])
        assert lcx_statistic(data, f0, delta=1e-4) == pytest.approx(1.0, abs=1e-4)

    def test_permutation_invariance_d2(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(6, 2))
        data = SampleSet.from_data(pts)
        f0 = pmf(np.full(6, 1 / 6), atoms=pts[::-1])
        assert abs(lcx_statistic(data, f0, delta=2e-3)) <= 2e-3

    def test_delta_must_be_positive(self):
        data = SampleSet.from_data([0.0])
        f0 = pmf([1.0], atoms=[1.0])
        with pytest.raises(ConfigurationError):
            lcx_statistic(data, f0, delta=0.0)


class TestMcThresholds:
    def test_ks_asymptotic_anchor(self):
        thr = mc_threshold_edf("ks", N=1000, alpha=0.05, reps=20_000, seed=0)
        assert 1.30 <= thr.value * math.sqrt(1000) <= 1.42

    def test_alpha_one_gives_minimum(self):
        thr = mc_threshold_edf("ks", N=20, alpha=1.0, reps=2000, seed=1)
        assert thr.value >= 1 / (2 * 20) - 1e-12

    def test_quantile_monotone_in_alpha(self):
        lo = mc_threshold_edf("ks", N=50, alpha=0.20, reps=5000, seed=2)
        hi = mc_threshold_edf("ks", N=50, alpha=0.05, reps=5000, seed=2)
        assert hi.value >= lo.value

    def test_high_alpha_near_minimum(self):
        thr = mc_threshold_edf("ks", N=100, alpha=0.999, reps=5000, seed=3)
        assert thr.value >= 1 / (2 * 100)
        median = mc_threshold_edf("ks", N=100, alpha=0.5, reps=5000, seed=3)
        assert thr.value < median.value

    def test_deterministic_per_seed(self):
        a = mc_threshold_edf("cvm", N=30, alpha=0.1, reps=2000, seed=7)
        b = mc_threshold_edf("cvm", N=30, alpha=0.1, reps=2000, seed=7)
        assert a.value == b.value


class TestDiscreteThresholds:
    def test_asymptotic_chi2_anchor(self):
        thr = asymptotic_threshold_discrete(2, 100, 0.05)
        assert thr.value == pytest.approx(math.sqrt(3.841458820694124 / 100), abs=1e-6)

    def test_mc_close_to_asymptotic(self):
        p0 = pmf([1 / 3, 1 / 3, 1 / 3])
        mc = mc_threshold_discrete("chi2", p0, N=500, alpha=0.1, reps=20_000, seed=0)
        asym = asymptotic_threshold_discrete(3, 500, 0.1)
        assert abs(mc.value - asym.value) / asym.value <= 0.15

    def test_mc_alpha_one_minimum(self):
        p0 = pmf([0.5, 0.5])
        thr = mc_threshold_discrete("chi2", p0, N=10, alpha=1.0, reps=1000, seed=0)
        assert thr.value >= 0.0


class TestBootstrapThresholds:
    def test_constant_statistic(self):
        data = SampleSet.from_data(np.arange(10.0))
        thr = bootstrap_threshold(lambda s: 3.25, data, alpha=0.1, B=200, seed=0)
        assert thr.value == pytest.approx(3.25)

    def test_moment_threshold_shrinks_with_n(self):
        rng = np.random.default_rng(0)
        meds = []
        for N in (100, 10_000):
            vals = []
            for seed in range(20):
                data = SampleSet.from_data(rng.normal(size=N))
                mu = float(np.mean(data.values))
                stat = lambda s, mu=mu: moment_statistic(s, "identity", mu)
                vals.append(bootstrap_threshold(stat, data, 0.1, B=200, seed=seed).value)
            meds.append(np.median(vals))
        assert meds[1] < meds[0]

    def test_deterministic(self):
        data = SampleSet.from_data(np.arange(25.0))
        stat = lambda s: float(np.mean(s.values))
        a = bootstrap_threshold(stat, data, 0.2, B=300, seed=5)
        b = bootstrap_threshold(stat, data, 0.2, B=300, seed=5)
        assert a.value == b.value


class TestLcxThresholds:
    def test_single_point_degenerate(self):
        data = SampleSet.from_data([1.5])
        thr = lcx_bootstrap_threshold(data, alpha=0.2, B=200, delta=1e-3, seed=0)
        assert thr.value <= 2e-3

    def test_shrinks_with_n_d2(self):
        meds = []
        for N in (50, 500):
            vals = []
            for seed in range(6):
                rng = np.random.default_rng(seed)
                data = SampleSet.from_data(rng.normal(size=(N, 2)))
                vals.append(lcx_bootstrap_threshold(data, 0.2, B=200, delta=0.05, seed=seed).value)
            meds.append(np.median(vals))
        assert meds[1] < meds[0]

    def test_deterministic(self):
        data = SampleSet.from_data(np.random.default_rng(3).normal(size=(30, 2)))
        a = lcx_bootstrap_threshold(data, 0.2, B=200, delta=0.05, seed=11)
        b = lcx_bootstrap_threshold(data, 0.2, B=200, delta=0.05, seed=11)
        assert a.value == b.value

    def test_vc_threshold_n2_exponent(self):
        thr = lcx_vc_threshold(N=2, d=1, alpha1=0.1, qbar_r=1.0)
        p = thr.meta["p"]
        expected = 0.5 * (math.sqrt(math.log(256) + 8 * math.log(2) + math.log(4) ** 2) - math.log(4))
        assert p == pytest.approx(expected, abs=1e-10)
        assert p == pytest.approx(1.110472, abs=1e-4)

    def test_vc_threshold_monotonicity(self):
        base = lcx_vc_threshold(100, 3, 0.1, 1.0).value
        assert lcx_vc_threshold(100, 3, 0.1, 2.0).value > base
        assert lcx_vc_threshold(100, 3, 0.05, 1.0).value > base

    def test_vc_growth_rate_bounded(self):
        vals = []
        for N in (100, 1000, 10_000, 100_000, 1_000_000):
            thr = lcx_vc_threshold(N, 2, 0.1, 1.0)
            p = thr.meta["p"]
            vals.append(thr.value * N ** (1 - 1 / p) / math.sqrt(math.log(N)))
        assert max(vals) / min(vals) <= 10.0

    def test_vc_requires_n2(self):
        with pytest.raises(DomainError):
            lcx_vc_threshold(1, 2, 0.1, 1.0)


class TestQuantiles:
    def test_t_normal_limit(self):
        assert student_t_quantile(10**6, 0.975) == pytest.approx(1.95996, abs=1e-3)

    def test_t_cauchy_quartile(self):
        assert student_t_quantile(1, 0.75) == pytest.approx(1.0, abs=1e-9)

    def test_chi2_exponential_closed_form(self):
        assert chi2_quantile(2, 0.95) == pytest.approx(-2 * math.log(0.05), abs=1e-9)

    def test_domain_errors(self):
        with pytest.raises(ConfigurationError):
            student_t_quantile(3, 1.5)


class TestThresholdCache:
    def test_round_trip(self, tmp_path):
        from gofdro import ThresholdCache
        from gofdro.gof import edf_threshold

        path = tmp_path / "cache.csv"
        cache = ThresholdCache(path)
        a = edf_threshold("ks", 50, 0.2, reps=2000, seed=0, cache=cache)
        cache2 = ThresholdCache(path)
        b = edf_threshold("ks", 50, 0.2, reps=2000, seed=0, cache=cache2)
        assert a.value == b.value
        assert cache2.get("ks", 50, 0.2, "monte-carlo", 2000, 0) == a.value

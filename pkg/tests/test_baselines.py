import math

import numpy as np
import pytest
from scipy import optimize

from gofdro import (
    CvarPortfolioCost,
    MaxBilinearCost,
    MomentDus,
    NewsvendorCost,
    Polyhedron,
    SampleSet,
    SupportSpec,
    delage_ye_bootstrap_radii,
    moment_dro_univariate,
    saa_solve,
    two_sample_saa,
)
from gofdro.baselines import scarf_bound
from gofdro.gof import student_t_quantile


def grid_moment_oracle(x, cost, dus, lo, hi, n_grid=4000):
    """LP oracle: worst expectation over grid pmfs matching the moment band."""
    grid = np.linspace(lo, hi, n_grid)
    c = cost.evaluate(x, grid)
    mu = float(dus.mu[0])
    var = float(dus.sigma[0, 0])
    r1 = math.sqrt(dus.gamma1 * var)
    A_ub = np.vstack([
        grid, -grid,
        (grid - mu) ** 2, -((grid - mu) ** 2),
    ])
    b_ub = np.array([mu + r1, -(mu - r1), dus.gamma2 * var, -dus.gamma3 * var])
    res = optimize.linprog(-c, A_ub=A_ub, b_ub=b_ub,
                           A_eq=np.ones((1, n_grid)), b_eq=[1.0],
                           bounds=(0, None), method="highs")
    assert res.status == 0
    return -res.fun


class TestSaa:
    def test_newsvendor_median(self):
        data = SampleSet.from_data([1.0, 2.0, 3.0])
        sol = saa_solve(data, NewsvendorCost(1.0, 1.0), Polyhedron.nonneg(1))
        assert sol.x[0] == pytest.approx(2.0, abs=1e-8)
        assert sol.value == pytest.approx(2.0 / 3.0, abs=1e-9)

    def test_single_point_fit(self):
        data = SampleSet.from_data([7.0])
        sol = saa_solve(data, NewsvendorCost(2.0, 3.0), Polyhedron.nonneg(1))
        assert sol.x[0] == pytest.approx(7.0, abs=1e-9)
        assert sol.value == pytest.approx(0.0, abs=1e-9)

    def test_cvar_two_point(self):
        data = SampleSet.from_data(np.array([[-1.0], [1.0]]))
        cost = CvarPortfolioCost(epsilon=0.5, d=1)
        X = Polyhedron.simplex(1).with_free_prefix(1)
        sol = saa_solve(data, cost, X)
        assert sol.value == pytest.approx(1.0, abs=1e-9)

    def test_bilinear_cost(self):
        data = SampleSet.from_data([0.0, 2.0])
        cost = MaxBilinearCost(pieces=((0.0, (1.0,), 1.0, (0.0,)),
                                       (1.0, (-1.0,), 0.0, (0.0,))))
        X = Polyhedron.box([0.0], [5.0])
        sol = saa_solve(data, cost, X)
        grid = np.linspace(0, 5, 2001)
        oracle = min(float(np.mean(cost.evaluate([g], data.points))) for g in grid)
        assert sol.value == pytest.approx(oracle, abs=1e-3)


class TestTwoSampleSaa:
    def test_constant_cost_bound_exact(self):
        data = SampleSet.from_data([4.0, 9.0, 1.0, 6.0])
        cost = MaxBilinearCost(pieces=((5.0, (0.0,), 0.0, (0.0,)),))
        res = two_sample_saa(data, cost, Polyhedron.nonneg(1), alpha=0.2)
        assert res.bound == pytest.approx(5.0, abs=1e-12)

    def test_hand_formula_n4(self):
        # original order [10, 30, 12, 40]: train {10, 30}, validate {12, 40}
        data = SampleSet.from_data([10.0, 30.0, 12.0, 40.0])
        cost = NewsvendorCost(b=2.0, h=1.0)
        res = two_sample_saa(data, cost, Polyhedron.nonneg(1), alpha=0.2)
        # theta = 2/3: train SAA minimizer is the larger point, x = 30
        assert res.x[0] == pytest.approx(30.0, abs=1e-8)
        costs = np.array([1.0 * (30 - 12), 2.0 * (40 - 30)])
        mu, sd = costs.mean(), costs.std(ddof=1)
        expected = mu + sd * student_t_quantile(1, 0.8) / math.sqrt(2)
        assert res.bound == pytest.approx(expected, abs=1e-9)
        assert student_t_quantile(1, 0.8) == pytest.approx(math.tan(0.3 * math.pi), abs=1e-9)

    def test_bound_at_least_validation_mean(self):
        rng = np.random.default_rng(0)
        data = SampleSet.from_data(rng.uniform(0, 50, 21))
        res = two_sample_saa(data, NewsvendorCost(3, 1), Polyhedron.nonneg(1), alpha=0.2)
        assert res.bound >= res.mu_valid - 1e-12

    def test_decision_ignores_validation_half(self):
        rng = np.random.default_rng(1)
        raw = rng.uniform(0, 50, 12)
        data = SampleSet.from_data(raw)
        res = two_sample_saa(data, NewsvendorCost(3, 1), Polyhedron.nonneg(1), 0.2)
        shuffled = raw.copy()
        shuffled[6:] = shuffled[6:][::-1]
        res2 = two_sample_saa(SampleSet.from_data(shuffled), NewsvendorCost(3, 1),
                              Polyhedron.nonneg(1), 0.2)
        assert res2.x[0] == res.x[0]
        assert res2.bound == pytest.approx(res.bound, abs=1e-12)


class TestDyRadii:
    def test_identical_data_degenerate(self):
        data = SampleSet.from_data(np.full(30, 3.5))
        dus = delage_ye_bootstrap_radii(data, alpha=0.2, B=200, seed=0)
        assert dus.gamma1 == 0.0
        assert dus.gamma2 == 1.0 and dus.gamma3 == 1.0

    def test_radii_shrink_with_n(self):
        stats = {50: [], 500: []}
        for N in stats:
            for seed in range(10):
                rng = np.random.default_rng(seed)
                data = SampleSet.from_data(rng.normal(10, 2, size=(N, 2)))
                dus = delage_ye_bootstrap_radii(data, 0.2, B=200, seed=seed)
                stats[N].append((dus.gamma1, dus.gamma2, dus.gamma3))
        g1_50, g2_50, g3_50 = map(np.median, zip(*stats[50]))
        g1_500, g2_500, g3_500 = map(np.median, zip(*stats[500]))
        assert g1_500 < g1_50
        assert g2_500 < g2_50
        assert g3_500 > g3_50

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        data = SampleSet.from_data(rng.normal(size=(40, 3)))
        a = delage_ye_bootstrap_radii(data, 0.2, B=200, seed=9)
        b = delage_ye_bootstrap_radii(data, 0.2, B=200, seed=9)
        assert (a.gamma1, a.gamma2, a.gamma3) == (b.gamma1, b.gamma2, b.gamma3)

    def test_invariants_hold(self):
        rng = np.random.default_rng(4)
        data = SampleSet.from_data(rng.standard_t(4, size=(60, 2)))
        dus = delage_ye_bootstrap_radii(data, 0.1, B=300, seed=1)
        assert dus.gamma1 >= 0 and dus.gamma2 >= 1 >= dus.gamma3 >= 0


class TestMomentDro:
    def test_exact_moments_linear_cost(self):
        # two-point law at {2, 6} with probs (0.5, 0.5): mu = 4, var = 4
        dus = MomentDus.exact([4.0], [[4.0]])
        cost = MaxBilinearCost(pieces=((1.0, (0.0,), 3.0, (0.0,)),))  # 1 + 3 xi
        sol = moment_dro_univariate(cost, Polyhedron.nonneg(1), dus,
                                    SupportSpec.interval(0.0, 10.0))
        assert sol.status == "optimal"
        assert sol.value == pytest.approx(1.0 + 3.0 * 4.0, abs=1e-6)

    def test_scarf_anchor_vs_grid(self):
        cost = NewsvendorCost(b=19.0, h=1.0)
        support = SupportSpec.interval(0.0, 2500.0)
        sol = scarf_bound(cost, mu=100.0, sigma=50.0, support=support)
        assert sol.status == "optimal"
        dus = MomentDus.exact([100.0], [[2500.0]])
        oracle = grid_moment_oracle(sol.x, cost, dus, 0.0, 2500.0, n_grid=12_000)
        assert abs(sol.value - oracle) / oracle <= 0.005

    def test_band_monotone(self):
        cost = NewsvendorCost(b=3.0, h=1.0)
        support = SupportSpec.interval(0.0, 300.0)
        vals = []
        for g2, g3 in ((1.5, 0.6), (1.2, 0.8), (1.0, 1.0)):
            dus = MomentDus(mu=[50.0], sigma=[[100.0]], gamma1=0.05, gamma2=g2, gamma3=g3)
            vals.append(moment_dro_univariate(cost, Polyhedron.nonneg(1), dus, support).value)
        assert vals[0] >= vals[1] - 1e-8 >= vals[2] - 2e-8

    def test_shrinking_radii_converge_to_known_moment_bound(self):
        cost = NewsvendorCost(b=19.0, h=1.0)
        support = SupportSpec.interval(0.0, 2500.0)
        target = scarf_bound(cost, 100.0, 50.0, support).value
        gaps = []
        for g1, g2, g3 in ((0.5, 1.5, 0.7), (0.05, 1.05, 0.95), (0.001, 1.001, 0.999)):
            dus = MomentDus(mu=[100.0], sigma=[[2500.0]], gamma1=g1, gamma2=g2, gamma3=g3)
            sol = moment_dro_univariate(cost, Polyhedron.nonneg(1), dus, support)
            gaps.append(sol.value - target)
        assert gaps[0] > gaps[1] > gaps[2] >= -1e-6
        assert gaps[2] <= 1e-3 * target

"""Acceptance criteria, one test per criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS/FAIL line
per criterion. Several criteria share Monte Carlo threshold tables through
module-scoped fixtures; total runtime is dominated by those simulations and
the replication studies.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from gofdro import (
    CvarPortfolioCost,
    DiscreteDus,
    DiscretePMF,
    GeneratorSpec,
    LcxDus,
    NewsvendorCost,
    Polyhedron,
    SampleSet,
    SupportSpec,
    Threshold,
    UnivariateDus,
    delage_ye_bootstrap_radii,
    discrete_worst_case,
    ks_newsvendor_closed_form,
    lcx_bootstrap_threshold,
    lcx_robust_minimize,
    lcx_value,
    mc_threshold_edf,
    moment_dro_univariate,
    pod_ks_approx,
    pod_resample,
    robust_minimize,
    saa_solve,
    sample,
    true_expected_cost,
    two_sample_saa,
)
from gofdro.gof import EDF_KINDS, _hinge_gap_sup
from gofdro.samples import newsvendor_true_optimum
from gofdro.univariate import ClosedFormInapplicable

DEMAND_71 = GeneratorSpec.truncated_normal(100.0, 50.0, 0.0, 250.0, seed=0)
COST_71 = NewsvendorCost(b=19.0, h=1.0)
SUPPORT_71 = SupportSpec.interval(0.0, 250.0)


def _draw(gen: GeneratorSpec, N: int, stream) -> SampleSet:
    seed = int(np.random.SeedSequence((gen.seed, N, *np.atleast_1d(stream))).generate_state(1)[0])
    return sample(GeneratorSpec(gen.family, gen.params, seed), N)


@contextmanager
def criterion(num, name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {num} ({name}): FAIL")
        raise
    print(f"ACCEPTANCE {num} ({name}): PASS")


@pytest.fixture(scope="module")
def ks_tables():
    """Shared KS thresholds at alpha = 0.2 (PoD sizes included)."""
    out = {}
    for N in (100, 101, 1000, 1001, 10_000):
        out[N] = mc_threshold_edf("ks", N, 0.2, reps=100_000, seed=0)
    return out


def test_criterion_01_closed_form_oracle_equivalence():
    with criterion(1, "closed form vs LP on 100 random instances"):
        rng = np.random.default_rng(2024)
        t0 = time.time()
        done = 0
        worst_z = worst_x = 0.0
        while done < 100:
            N = int(rng.integers(5, 201))
            b = float(rng.uniform(0.5, 20))
            h = float(rng.uniform(0.5, 20))
            lo = float(rng.uniform(0, 50))
            hi = float(rng.uniform(100, 200))
            qmax = min(b, h) / (b + h)
            q = float(rng.uniform(0.15, 0.95) * qmax)
            if q <= 1.0 / (2 * N):
                continue
            data = SampleSet.from_data(np.sort(rng.uniform(lo, hi, N)))
            support = SupportSpec.interval(lo, hi)
            cf = ks_newsvendor_closed_form(data, NewsvendorCost(b, h),
                                           Threshold.user(q, 0.2), support)
            dus = UnivariateDus.from_sample(data, "ks", 0.2, Threshold.user(q, 0.2),
                                            support)
            lp = robust_minimize(NewsvendorCost(b, h), Polyhedron.nonneg(1), dus,
                                 method="conic")
            assert lp.status == "optimal"
            worst_z = max(worst_z, abs(cf.value - lp.value))
            worst_x = max(worst_x, abs(cf.x[0] - lp.x[0]) / (hi - lo))
            done += 1
        elapsed = time.time() - t0
        assert worst_z <= 1e-6, worst_z
        assert worst_x <= 1e-6, worst_x
        assert elapsed < 30.0, elapsed


def test_criterion_02_ks_threshold_anchor():
    with criterion(2, "sqrt(N) KS thresholds near asymptotic table"):
        t0 = time.time()
        anchors = {0.05: 1.36, 0.10: 1.22, 0.20: 1.07}
        for alpha, q_alpha in anchors.items():
            thr = mc_threshold_edf("ks", 1000, alpha, reps=100_000, seed=0)
            scaled = thr.value * math.sqrt(1000)
            assert abs(scaled - q_alpha) / q_alpha <= 0.10, (alpha, scaled)
        assert time.time() - t0 < 60.0


def test_criterion_03_finite_sample_guarantee(ks_tables):
    with criterion(3, "80% guarantee coverage at N=100, 200 replicates"):
        t0 = time.time()
        thr = ks_tables[100]
        hits = 0
        for r in range(200):
            data = _draw(DEMAND_71, 100, r)
            dus = UnivariateDus.from_sample(data, "ks", 0.2, thr, SUPPORT_71)
            sol = robust_minimize(COST_71, Polyhedron.nonneg(1), dus)
            assert sol.status == "optimal"
            z = true_expected_cost(DEMAND_71, COST_71, sol.x)
            if sol.value >= z - 1e-9:
                hits += 1
        coverage = hits / 200
        assert coverage >= 0.80 - 0.05, coverage
        assert time.time() - t0 < 600.0


def test_criterion_04_unbounded_detector():
    with criterion(4, "unbounded status without moment leg, finite with it"):
        gen = GeneratorSpec.gumbel(70.0, 30.0 / np.euler_gamma, lo=0.0, seed=5)
        support = SupportSpec.interval(0.0, np.inf)
        for kind in EDF_KINDS:
            thr_bare = mc_threshold_edf(kind, 40, 0.2, reps=5000, seed=1)
            thr_m = mc_threshold_edf(kind, 40, 0.15, reps=5000, seed=1)
            for inst in range(10):
                data = _draw(gen, 40, (hash(kind) % 1000, inst))
                bare = UnivariateDus.from_sample(data, kind, 0.2, thr_bare, support)
                sol = robust_minimize(COST_71, Polyhedron.nonneg(1), bare)
                assert sol.status == "unbounded", (kind, inst)
                withm = UnivariateDus.from_sample(
                    data, kind, 0.15, thr_m, support, phi="identity", alpha2=0.05
                )
                sol2 = robust_minimize(COST_71, Polyhedron.nonneg(1), withm)
                assert sol2.status == "optimal", (kind, inst, sol2.status)
                assert np.isfinite(sol2.value)


def test_criterion_05_convergence_and_dy_plateau(ks_tables):
    with criterion(5, "robust values converge; moment baseline plateaus"):
        t0 = time.time()
        _, z_stoch = newsvendor_true_optimum(DEMAND_71, 19.0, 1.0)
        med_robust, med_gap, med_dy_gap = {}, {}, {}
        for N in (100, 1000, 10_000):
            thr = ks_tables[N]
            robust_vals, robust_gaps, dy_gaps = [], [], []
            for r in range(20):
                data = _draw(DEMAND_71, N, (5, r))
                dus = UnivariateDus.from_sample(data, "ks", 0.2, thr, SUPPORT_71)
                sol = robust_minimize(COST_71, Polyhedron.nonneg(1), dus)
                assert sol.status == "optimal"
                robust_vals.append(sol.value)
                robust_gaps.append(abs(sol.value - z_stoch))
                mdus = delage_ye_bootstrap_radii(data, 0.2, B=200, seed=r)
                dy = moment_dro_univariate(COST_71, Polyhedron.nonneg(1), mdus,
                                           SUPPORT_71)
                assert dy.status == "optimal"
                dy_gaps.append(abs(dy.value - z_stoch))
            med_robust[N] = float(np.median(robust_vals))
            med_gap[N] = float(np.median(robust_gaps))
            med_dy_gap[N] = float(np.median(dy_gaps))
        assert med_robust[100] > med_robust[1000] > med_robust[10_000], med_robust
        assert med_gap[10_000] < 0.5 * med_gap[100], med_gap
        assert med_dy_gap[10_000] >= 2.0 * med_gap[10_000], (med_dy_gap, med_gap)
        assert time.time() - t0 < 1800.0


def grid_worst_case_n3(kind, phat, costs, q, step=1e-3):
    p1 = np.arange(0.0, 1.0 + step / 2, step)
    g1, g2 = np.meshgrid(p1, p1, indexing="ij")
    keep = g1 + g2 <= 1.0 + 1e-12
    grid = np.column_stack([g1[keep], g2[keep], 1.0 - g1[keep] - g2[keep]])
    grid = np.clip(grid, 0.0, None)
    ph = np.asarray(phat)
    if kind == "chi2":
        with np.errstate(divide="ignore", invalid="ignore"):
            stat2 = np.sum(np.where(grid > 0, (grid - ph) ** 2 / grid,
                                    np.where(ph[None, :] > 0, np.inf, 0.0)), axis=1)
        stat = np.sqrt(stat2)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = ph * np.log(ph[None, :] / grid)
        terms = np.where(ph[None, :] > 0, terms, 0.0)
        stat = np.sqrt(2.0 * np.clip(np.sum(terms, axis=1), 0.0, None))
    feas = stat <= q
    return float(np.max(grid[feas] @ np.asarray(costs)))


def test_criterion_06_discrete_brute_force_inline():
    with criterion(6, "chi-square and G worst cases vs 1e-3 simplex grid"):
        rng = np.random.default_rng(6)
        phat = DiscretePMF(support=SupportSpec.discrete([0.0, 1.0, 2.0]),
                           probs=np.array([0.5, 0.3, 0.2]))
        for trial in range(20):
            costs = rng.uniform(-5, 5, 3)
            q = float(rng.uniform(0.1, 0.5))
            for kind in ("chi2", "gtest"):
                dus = DiscreteDus(kind, Threshold.user(q, 0.2), phat)
                sol = discrete_worst_case(costs, dus)
                oracle = grid_worst_case_n3(kind, phat.probs, costs, q)
                assert abs(sol.value - oracle) <= 2e-3, (trial, kind, sol.value, oracle)


def cvar_sorted_oracle(x, pts, eps):
    losses = -(np.asarray(pts) @ np.asarray(x))
    best = np.inf
    for beta in np.sort(losses):
        best = min(best, beta + float(np.mean(np.maximum(losses - beta, 0))) / eps)
    return best


def test_criterion_07_lcx_degeneracy_and_bootstrap():
    with criterion(7, "portfolio LP: exact at Q=0, valid with bootstrap"):
        rng = np.random.default_rng(7)
        for trial in range(20):
            d = int(rng.integers(2, 11))
            N = int(rng.integers(30, 201))
            if trial % 2 == 0:
                pts = _draw(GeneratorSpec.pareto_factor(d=d, seed=trial), N, trial).points
            else:
                pts = rng.normal(0.02, 0.05, size=(N, d))
            data = SampleSet.from_data(pts)
            cost = CvarPortfolioCost(epsilon=0.1, d=d)
            X = Polyhedron.simplex(d).with_free_prefix(1)
            sol0 = lcx_robust_minimize(cost, X, LcxDus(data=data, q_c=Threshold.user(0.0, 0.2)))
            saa = saa_solve(data, cost, X)
            assert abs(sol0.value - saa.value) <= 1e-6, trial
            q_c = lcx_bootstrap_threshold(data, 0.2, B=200, delta=0.01, seed=trial)
            solb = lcx_robust_minimize(cost, X, LcxDus(data=data, q_c=q_c))
            assert solb.status == "optimal"
            assert solb.value >= cvar_sorted_oracle(solb.x[1:], pts, 0.1) - 1e-8
        # timing anchor: d=10, N=100 end to end
        pts = _draw(GeneratorSpec.pareto_factor(d=10, seed=999), 100, 0).points
        data = SampleSet.from_data(pts)
        t0 = time.time()
        q_c = lcx_bootstrap_threshold(data, 0.2, B=200, delta=0.01, seed=0)
        sol = lcx_robust_minimize(CvarPortfolioCost(epsilon=0.1, d=10),
                                  Polyhedron.simplex(10).with_free_prefix(1),
                                  LcxDus(data=data, q_c=q_c))
        assert sol.status == "optimal"
        assert time.time() - t0 < 60.0


def lcx_primal_oracle(x, pieces, data, nu, rng, n_grid=100, delta=1e-6, iters=300):
    from scipy import optimize

    grid = rng.normal(scale=2.0, size=(n_grid, data.d))
    atoms = np.vstack([data.points, grid])
    costs = pieces.evaluate(np.asarray(x, dtype=float), atoms)
    m = len(atoms)
    A_ub, b_ub = [], []
    p = np.full(m, 1.0 / m)
    for _ in range(iters):
        weights = np.concatenate([p, -np.ones(data.N) / data.N])
        stacked = np.vstack([atoms, data.points])
        val, ab, _ = _hinge_gap_sup(stacked, weights, delta)
        if val <= nu + delta:
            break
        a, b = ab[:-1], ab[-1]
        A_ub.append(np.maximum(atoms @ a - b, 0.0))
        b_ub.append(float(np.mean(np.maximum(data.points @ a - b, 0.0))) + nu)
        res = optimize.linprog(-costs, A_ub=np.vstack(A_ub), b_ub=np.array(b_ub),
                               A_eq=np.ones((1, m)), b_eq=[1.0], bounds=(0, None),
                               method="highs")
        assert res.status == 0
        p = res.x
    return float(p @ costs)


def test_criterion_08_lcx_upper_bound_soundness():
    with criterion(8, "hinge-gap LP dominates grid-restricted inner sup"):
        rng = np.random.default_rng(8)
        for trial in range(20):
            d = int(rng.integers(1, 3))
            N = int(rng.integers(4, 11))
            data = SampleSet.from_data(rng.normal(size=(N, d)))
            cost = CvarPortfolioCost(epsilon=0.25, d=d)
            w = rng.dirichlet(np.ones(d))
            x = np.concatenate([[float(rng.normal())], w])
            nu = float(rng.uniform(0.0, 0.4))
            dus = LcxDus(data=data, q_c=Threshold.user(nu, 0.2))
            upper = lcx_value(x, cost, dus)
            oracle = lcx_primal_oracle(x, cost.bilinear_pieces(), data, nu, rng,
                                       n_grid=60, delta=1e-5)
            assert upper >= oracle - 5e-4, (trial, upper, oracle)


def test_criterion_09_pod_agreement(ks_tables):
    with criterion(9, "threshold-difference PoD within 2x of resampling"):
        for N, m_sub in ((100, 60), (1000, 40)):
            q_n, q_n1 = ks_tables[N], ks_tables[N + 1]
            thresholds = {N: q_n, N + 1: q_n1}

            def solve_fn(data):
                dus = UnivariateDus.from_sample(data, "ks", 0.2,
                                                thresholds[data.N], SUPPORT_71)
                return robust_minimize(COST_71, Polyhedron.nonneg(1), dus)

            ratios = []
            for seed in range(20):
                data = _draw(DEMAND_71, N, (9, seed))
                res = pod_resample(data, solve_fn, m=m_sub, seed=seed)
                base = solve_fn(data)
                approx = pod_ks_approx(data, COST_71, q_n, q_n1, SUPPORT_71,
                                       x=base.x)
                if res.value > 0:
                    ratios.append(approx.value / res.value)
            med = float(np.median(ratios))
            assert 0.5 <= med <= 2.0, (N, med, len(ratios))


def test_criterion_10_decision_stability(ks_tables):
    with criterion(10, "robust order quantity varies less than 2-SAA's"):
        thr = ks_tables[100]
        robust_x, twosaa_x = [], []
        for r in range(100):
            data = _draw(DEMAND_71, 100, (10, r))
            dus = UnivariateDus.from_sample(data, "ks", 0.2, thr, SUPPORT_71)
            sol = robust_minimize(COST_71, Polyhedron.nonneg(1), dus)
            robust_x.append(float(sol.x[0]))
            res = two_sample_saa(data, COST_71, Polyhedron.nonneg(1), 0.2)
            twosaa_x.append(float(res.x[0]))
        var_r = float(np.var(robust_x, ddof=1))
        var_t = float(np.var(twosaa_x, ddof=1))
        assert var_r <= var_t, (var_r, var_t)


def test_criterion_11_twosaa_factor_model_coverage_below_80():
    with criterion(11, "2-SAA coverage shortfall on the heavy-tailed factor model"):
        gen = GeneratorSpec.pareto_factor(d=10, seed=11)
        cost = CvarPortfolioCost(epsilon=0.1, d=10)
        X = Polyhedron.simplex(10).with_free_prefix(1)
        eval_pts = sample(GeneratorSpec.pareto_factor(d=10, seed=7777), 400_000).points
        hits = 0
        for r in range(200):
            data = _draw(gen, 1000, (11, r))
            res = two_sample_saa(data, cost, X, alpha=0.2)
            z = float(np.mean(cost.evaluate(res.x, eval_pts)))
            if res.bound >= z:
                hits += 1
        coverage = hits / 200
        assert coverage < 0.80, coverage

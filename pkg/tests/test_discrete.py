import numpy as np
import pytest

from gofdro import (
    DiscreteDus,
    DiscretePMF,
    SupportSpec,
    Threshold,
    asymptotic_threshold_discrete,
    discrete_robust_minimize,
    discrete_statistic,
    discrete_worst_case,
)
from gofdro.costs import Polyhedron, ScenarioTwoStageCost
from gofdro.cones import ProgramEditor, solve


def pmf(probs):
    probs = np.asarray(probs, dtype=float)
    return DiscretePMF(support=SupportSpec.discrete(np.arange(len(probs), dtype=float)),
                       probs=probs)


def simplex_grid(n, step=1e-3):
    """All pmfs on n=3 atoms at the given mesh."""
    assert n == 3
    p1 = np.arange(0.0, 1.0 + step / 2, step)
    g1, g2 = np.meshgrid(p1, p1, indexing="ij")
    keep = g1 + g2 <= 1.0 + 1e-12
    p = np.column_stack([g1[keep], g2[keep], 1.0 - g1[keep] - g2[keep]])
    return np.clip(p, 0.0, None)


def grid_worst_case(kind, phat, costs, q, step=1e-3):
    grid = simplex_grid(len(phat), step)
    ph = np.asarray(phat)
    if kind == "chi2":
        with np.errstate(divide="ignore", invalid="ignore"):
            stat2 = np.sum(np.where(grid > 0, (grid - ph) ** 2 / grid, np.where(ph[None, :] > 0, np.inf, 0.0)), axis=1)
        stat = np.sqrt(stat2)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = ph * np.log(ph[None, :] / grid)
        terms = np.where(ph[None, :] > 0, terms, 0.0)
        stat = np.sqrt(2.0 * np.clip(np.sum(terms, axis=1), 0.0, None))
    feas = stat <= q
    return float(np.max(grid[feas] @ np.asarray(costs)))


class TestDiscreteWorstCase:
    def test_zero_radius_is_plug_in(self):
        dus = DiscreteDus("chi2", Threshold.user(0.0, 0.2), pmf([0.5, 0.3, 0.2]))
        sol = discrete_worst_case([1.0, 2.0, 3.0], dus)
        assert sol.value == pytest.approx(0.5 + 0.6 + 0.6, abs=1e-7)
        dus_g = DiscreteDus("gtest", Threshold.user(0.0, 0.2), pmf([0.5, 0.3, 0.2]))
        sol_g = discrete_worst_case([1.0, 2.0, 3.0], dus_g)
        assert sol_g.value == pytest.approx(sol.value, abs=1e-6)

    @pytest.mark.parametrize("kind", ["chi2", "gtest"])
    def test_huge_radius_approaches_max_cost(self, kind):
        # both statistics blow up near the simplex boundary, so the full
        # simplex is reached only in the limit of the radius
        vals = []
        for q in (20.0, 200.0):
            dus = DiscreteDus(kind, Threshold.user(q, 0.2), pmf([0.5, 0.3, 0.2]))
            vals.append(discrete_worst_case([1.0, 5.0, 3.0], dus).value)
        assert vals[0] <= vals[1] + 1e-7 <= 5.0 + 1e-7
        assert vals[1] == pytest.approx(5.0, abs=1e-3)

    @pytest.mark.parametrize("kind", ["chi2", "gtest"])
    def test_matches_simplex_grid(self, kind):
        dus = DiscreteDus(kind, Threshold.user(0.3, 0.2), pmf([0.5, 0.3, 0.2]))
        sol = discrete_worst_case([1.0, 2.0, 3.0], dus)
        oracle = grid_worst_case(kind, [0.5, 0.3, 0.2], [1.0, 2.0, 3.0], 0.3)
        assert sol.value == pytest.approx(oracle, abs=2e-3)

    @pytest.mark.parametrize("kind", ["chi2", "gtest"])
    def test_worst_pmf_feasible(self, kind):
        phat = pmf([0.4, 0.4, 0.2])
        dus = DiscreteDus(kind, Threshold.user(0.25, 0.2), phat)
        sol = discrete_worst_case([3.0, 1.0, 2.0], dus)
        worst = pmf(sol.meta["pmf"])
        assert worst.probs.sum() == pytest.approx(1.0, abs=1e-8)
        assert discrete_statistic(kind, worst, phat) <= 0.25 + 1e-6
        assert worst.probs @ [3.0, 1.0, 2.0] == pytest.approx(sol.value, abs=1e-5)

    def test_value_convex_nondecreasing_in_costs(self):
        dus = DiscreteDus("chi2", Threshold.user(0.2, 0.2), pmf([0.5, 0.3, 0.2]))
        c = np.array([1.0, 2.0, 3.0])
        base = discrete_worst_case(c, dus).value
        for j in range(3):
            eps = 1e-4
            up = c.copy(); up[j] += eps
            dn = c.copy(); dn[j] -= eps
            v_up = discrete_worst_case(up, dus).value
            v_dn = discrete_worst_case(dn, dus).value
            assert v_up >= base - 1e-9          # nondecreasing
            assert v_up + v_dn >= 2 * base - 1e-9  # convex

    def test_gtest_soc_rewrite_close(self):
        rng = np.random.default_rng(1)
        probs = rng.dirichlet(np.ones(8))
        costs = rng.uniform(0, 5, 8)
        dus = DiscreteDus("gtest", Threshold.user(0.3, 0.2), pmf(probs))
        exact = discrete_worst_case(costs, dus).value
        approx = discrete_worst_case(costs, dus, use_soc_rewrite=True).value
        assert abs(exact - approx) <= 1e-4

    def test_zero_count_cells_allowed(self):
        phat = pmf([0.7, 0.3, 0.0])
        dus = DiscreteDus("chi2", Threshold.user(0.3, 0.2), phat)
        sol = discrete_worst_case([0.0, 0.0, 10.0], dus)
        # chi-square lets the hypothesis put probability on unseen atoms
        assert sol.value > 0.1


class TestTheorem8AgainstDirectPrimal:
    """Independent construction: maximize p'c over the region directly."""

    def direct_primal(self, kind, phat, costs, q):
        n = len(phat)
        ed = ProgramEditor()
        p = ed.add_vars(n, obj=np.asarray(costs, dtype=float))
        ed.add_block(np.arange(n), p, np.ones(n), np.zeros(n), "nonneg")
        ed.add_block(np.zeros(n, dtype=int), p, np.ones(n), [-1.0], "zero")
        if kind == "chi2":
            v = ed.add_vars(n)
            # (p_j - ph_j)^2 <= v_j p_j via rotated cone
            for j in range(n):
                ed.add_block(
                    [0, 0, 1, 1, 2, 2],
                    [v[j], p[j], p[j], p[j], v[j], p[j]],
                    [1.0, 1.0, 2.0, 0.0, 1.0, -1.0],
                    [0.0, -2.0 * phat[j], 0.0],
                    "soc",
                )
            ed.add_block(np.zeros(n, dtype=int), v, -np.ones(n), [q * q], "nonneg")
        else:
            u = ed.add_vars(n)
            for j in range(n):
                ed.add_block([0, 2], [u[j], p[j]], [1.0, 1.0], [0.0, 1.0, 0.0], "exp")
            mask = np.asarray(phat) > 0
            ent = float(np.sum(np.asarray(phat)[mask] * np.log(np.asarray(phat)[mask])))
            ed.add_block(np.zeros(n, dtype=int), u, np.asarray(phat),
                         [q * q / 2.0 - ent], "nonneg")
        return solve(ed.program(sense="max"))

    @pytest.mark.parametrize("kind", ["chi2", "gtest"])
    def test_dual_equals_direct_primal(self, kind):
        rng = np.random.default_rng(7)
        for _ in range(5):
            probs = rng.dirichlet(np.full(4, 2.0))
            costs = rng.uniform(-2, 5, 4)
            q = float(rng.uniform(0.05, 0.6))
            dus = DiscreteDus(kind, Threshold.user(q, 0.2), pmf(probs))
            dual_val = discrete_worst_case(costs, dus).value
            prim = self.direct_primal(kind, probs, costs, q)
            assert prim.status == "optimal"
            assert dual_val == pytest.approx(prim.value, rel=1e-6, abs=1e-6)


class TestScenarioTwoStage:
    def one_scenario_cost(self):
        # recourse: y = b - x (identity B), value max y = b - x
        return ScenarioTwoStageCost(
            c=(1.0,),
            scenarios=({"f": (1.0,), "A": ((1.0,),), "B": ((1.0,),), "b": (4.0,)},),
            gammas=(-1.0,),
            betas=(0.0,),
        )

    def test_single_scenario_deterministic_lp(self):
        cost = self.one_scenario_cost()
        dus = DiscreteDus("chi2", Threshold.user(0.0, 0.2), pmf([1.0]))
        X = Polyhedron.box([0.0], [3.0])
        sol = discrete_robust_minimize(cost, dus, X=X)
        assert sol.status == "optimal"
        # cost = -(x + (4 - x)) = -4 regardless of x
        assert sol.value == pytest.approx(-4.0, abs=1e-7)

    def test_q_zero_equals_saa(self):
        cost = ScenarioTwoStageCost(
            c=(1.0, 0.5),
            scenarios=(
                {"f": (1.0, 0.0), "A": ((1.0, 0.0),), "B": ((1.0, 2.0),), "b": (5.0,)},
                {"f": (0.5, 1.0), "A": ((0.0, 1.0),), "B": ((1.0, 1.0),), "b": (3.0,)},
            ),
            gammas=(-1.0, -0.5),
            betas=(0.0, -1.0),
        )
        phat = pmf([0.6, 0.4])
        dus = DiscreteDus("chi2", Threshold.user(0.0, 0.2), phat)
        X = Polyhedron.box([0.0, 0.0], [2.0, 2.0])
        sol = discrete_robust_minimize(cost, dus, X=X)
        assert sol.status == "optimal"
        # oracle: direct scenario-cost evaluation on a fine x grid
        best = np.inf
        for x1 in np.linspace(0, 2, 41):
            for x2 in np.linspace(0, 2, 41):
                vals = cost.atom_costs([x1, x2])
                best = min(best, float(phat.probs @ vals))
        assert sol.value <= best + 1e-6
        assert sol.value >= best - 0.05  # grid resolution slack

    def test_bound_dominates_saa_and_gap_shrinks(self):
        cost = self.one_scenario_cost()
        cost = ScenarioTwoStageCost(
            c=(1.0,),
            scenarios=(
                {"f": (1.0,), "A": ((1.0,),), "B": ((1.0,),), "b": (4.0,)},
                {"f": (2.0,), "A": ((1.0,),), "B": ((1.0,),), "b": (6.0,)},
                {"f": (0.5,), "A": ((1.0,),), "B": ((1.0,),), "b": (2.0,)},
            ),
            gammas=(-1.0,),
            betas=(0.0,),
        )
        phat = pmf([0.5, 0.25, 0.25])
        X = Polyhedron.box([0.0], [1.5])
        saa = discrete_robust_minimize(cost, DiscreteDus("chi2", Threshold.user(0.0, 0.2), phat), X=X)
        gaps = []
        for N in (50, 500, 5000):
            q = asymptotic_threshold_discrete(3, N, 0.2)
            sol = discrete_robust_minimize(cost, DiscreteDus("chi2", q, phat), X=X)
            assert sol.value >= saa.value - 1e-8
            gaps.append(sol.value - saa.value)
        assert gaps[0] > gaps[1] > gaps[2] >= 0

    def test_infeasible_recourse_reports_scenario(self):
        cost = ScenarioTwoStageCost(
            c=(1.0,),
            scenarios=(
                {"f": (1.0,), "A": ((1.0,),), "B": ((1.0,),), "b": (4.0,)},
                # B = 0 and b != A x for any x in [0, 1]: infeasible
                {"f": (1.0,), "A": ((1.0,),), "B": ((0.0,),), "b": (9.0,)},
            ),
            gammas=(-1.0,),
            betas=(0.0,),
        )
        dus = DiscreteDus("chi2", Threshold.user(0.1, 0.2), pmf([0.5, 0.5]))
        sol = discrete_robust_minimize(cost, dus, X=Polyhedron.box([0.0], [1.0]))
        assert sol.status == "infeasible"
        assert sol.meta.get("scenario") == 1

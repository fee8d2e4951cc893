"""Worst-case expectations over chi-square and G-test confidence regions.

For known finite support, the uncertainty set is a generalized ball of
probability vectors around the observed frequencies. The worst case of a
linear cost functional over it dualizes into a small single-level program:
one 3-d second-order cone per atom for the chi-square ball, one exponential
cone per atom for the G-test ball (with an optional second-order-cone
rewrite of the latter for solvers without exponential cones).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._validation import ConfigurationError, DomainError
from .cones import ProgramEditor, exp_to_soc, solve
from .costs import Polyhedron, ScenarioTwoStageCost
from .gof import DISCRETE_KINDS, Threshold
from .samples import DiscretePMF
from .solution import RobustSolution


@dataclass(frozen=True)
class DiscreteDus:
    """Confidence region {p0 : statistic(p0, phat) <= Q} on a finite support."""

    kind: str
    q: Threshold
    phat: DiscretePMF

    def __post_init__(self):
        if self.kind not in DISCRETE_KINDS:
            raise ConfigurationError(f"unknown discrete test kind {self.kind!r}")

    @property
    def n(self) -> int:
        return self.phat.support.n_atoms


def _chi2_skeleton(ed: ProgramEditor, dus: DiscreteDus):
    """Variables and rows of the chi-square dual; returns the c_j indices."""
    n = dus.n
    Q = dus.q.value
    phat = dus.phat.probs
    r = ed.add_vars(1, obj=1.0)[0]
    s = ed.add_vars(1, obj=Q * Q)[0]
    t = ed.add_vars(n, obj=-phat)
    y = ed.add_vars(n)
    c = ed.add_vars(n)
    ed.add_block([0], [s], [1.0], [0.0], "nonneg")
    ed.add_block(np.arange(n), y, np.ones(n), np.zeros(n), "nonneg")
    # s + r - c_j >= 0
    rows = np.repeat(np.arange(n), 3)
    cols = np.column_stack([np.full(n, s), np.full(n, r), c]).ravel()
    vals = np.tile([1.0, 1.0, -1.0], n)
    ed.add_block(rows, cols, vals, np.zeros(n), "nonneg")
    # y_j - 2 s - t_j >= 0
    cols = np.column_stack([y, np.full(n, s), t]).ravel()
    vals = np.tile([1.0, -2.0, -1.0], n)
    ed.add_block(rows, cols, vals, np.zeros(n), "nonneg")
    # (2 s - c_j + r, r - c_j, y_j) in SOC3 per atom
    for j in range(n):
        ed.add_block(
            [0, 0, 0, 1, 1, 2],
            [s, c[j], r, r, c[j], y[j]],
            [2.0, -1.0, 1.0, 1.0, -1.0, 1.0],
            [0.0, 0.0, 0.0],
            "soc",
        )
    return c


def _gtest_skeleton(ed: ProgramEditor, dus: DiscreteDus):
    n = dus.n
    Q = dus.q.value
    phat = dus.phat.probs
    r = ed.add_vars(1, obj=1.0)[0]
    s = ed.add_vars(1, obj=0.5 * Q * Q)[0]
    t = ed.add_vars(n, obj=-phat)
    c = ed.add_vars(n)
    ed.add_block([0], [s], [1.0], [0.0], "nonneg")
    # (t_j, s, s + r - c_j) in the exponential cone; the optimal argument is
    # log((s + r - c_j)/s) = O(log n + Q^2), well inside this declared range
    arg_range = 16.0
    for j in range(n):
        ed.add_block(
            [0, 1, 2, 2, 2],
            [t[j], s, s, r, c[j]],
            [1.0, 1.0, 1.0, 1.0, -1.0],
            [0.0, 0.0, 0.0],
            "exp",
            exp_arg_range=arg_range,
        )
    return c


def _pin_costs(ed: ProgramEditor, c_idx, values):
    """c_j = value_j rows; their duals price the per-atom costs."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    return ed.add_block(np.arange(n), c_idx, np.ones(n), -values, "zero")


def discrete_worst_case(
    costs: Sequence[float],
    dus: DiscreteDus,
    use_soc_rewrite: bool = False,
    tol: float = 1e-8,
):
    """(value, worst-case pmf) of sup over the region of sum_j p0_j costs_j.

    `use_soc_rewrite=True` replaces the G-test exponential cones by the
    certified second-order approximation (accuracy 2^-24 in the exponent).
    """
    costs = np.asarray(costs, dtype=float)
    if len(costs) != dus.n:
        raise ConfigurationError("one cost per support atom required")
    if not np.all(np.isfinite(costs)):
        raise DomainError("atom costs must be finite")
    if dus.q.value == 0.0:
        # the region degenerates to the observed frequencies; the dual's
        # infimum is only attained in a limit, so plug in directly
        pmf = dus.phat.probs.copy()
        return RobustSolution(
            x=None, value=float(pmf @ costs), status="optimal",
            atoms=np.column_stack([np.arange(dus.n, dtype=float), pmf]),
            gap=0.0, meta={"pmf": pmf},
        )
    ed = ProgramEditor()
    c_idx = _chi2_skeleton(ed, dus) if dus.kind == "chi2" else _gtest_skeleton(ed, dus)
    pin_block = _pin_costs(ed, c_idx, costs)
    prog = ed.program(sense="min")
    if use_soc_rewrite:
        # 14 accuracy bits keep the squaring tower well-conditioned while
        # staying inside the 1e-4 agreement budget with the exact cone
        prog = exp_to_soc(prog, 14)
        tol = max(tol, 1e-7)
    res = solve(prog, tol)
    if res.status == "numerical-limit" and use_soc_rewrite:
        res = solve(prog, 1e-6)
    if res.status != "optimal":
        return RobustSolution(x=None, value=None, status=res.status)
    pmf = -res.duals[pin_block]
    pmf = np.clip(pmf, 0.0, None)
    if pmf.sum() > 0:
        pmf = pmf / pmf.sum()
    return RobustSolution(
        x=None,
        value=res.value,
        status="optimal",
        atoms=np.column_stack([np.arange(dus.n, dtype=float), pmf]),
        gap=res.residuals.get("gap", float("nan")),
        meta={"pmf": pmf},
    )


def discrete_robust_minimize(
    cost,
    dus: DiscreteDus,
    X: Optional[Polyhedron] = None,
    use_soc_rewrite: bool = False,
    tol: float = 1e-8,
) -> RobustSolution:
    """min over x of the worst-case expected scenario cost.

    `cost` is either a ScenarioTwoStageCost (recourse variables are
    introduced per scenario) or a plain sequence of per-atom costs (no
    decision, reduces to `discrete_worst_case`).
    """
    if not isinstance(cost, ScenarioTwoStageCost):
        return discrete_worst_case(np.asarray(cost, dtype=float), dus,
                                   use_soc_rewrite=use_soc_rewrite, tol=tol)
    if cost.n_scenarios != dus.n:
        raise ConfigurationError("one scenario per support atom required")
    ed = ProgramEditor()
    if dus.q.value == 0.0:
        # degenerate region: minimize the plug-in average directly
        c_idx = ed.add_vars(dus.n, obj=dus.phat.probs)
    else:
        c_idx = _chi2_skeleton(ed, dus) if dus.kind == "chi2" else _gtest_skeleton(ed, dus)
    d_x = cost.x_dim
    x_idx = ed.add_vars(d_x)
    if X is None:
        X = Polyhedron.nonneg(d_x)
    _decision_rows(ed, X, x_idx)
    c_lin = np.asarray(cost.c, dtype=float)
    env_blocks = []
    for j, sc in enumerate(cost.scenarios):
        f = np.asarray(sc["f"], dtype=float)
        A = np.asarray(sc["A"], dtype=float)
        B = np.asarray(sc["B"], dtype=float)
        bb = np.asarray(sc["b"], dtype=float)
        d_y = B.shape[1]
        y = ed.add_vars(d_y)
        ed.add_block(np.arange(d_y), y, np.ones(d_y), np.zeros(d_y), "nonneg")
        rows, cols, vals = [], [], []
        for rr in range(A.shape[0]):
            for jj in range(d_x):
                if A[rr, jj]:
                    rows.append(rr)
                    cols.append(int(x_idx[jj]))
                    vals.append(float(A[rr, jj]))
            for jj in range(d_y):
                if B[rr, jj]:
                    rows.append(rr)
                    cols.append(int(y[jj]))
                    vals.append(float(B[rr, jj]))
        ed.add_block(rows, cols, vals, -bb, "zero")
        rows, cols, vals, offs = [], [], [], []
        for k, (gk, bk) in enumerate(zip(cost.gammas, cost.betas)):
            rows_k = len(offs)
            cols.append(int(c_idx[j]))
            rows.append(rows_k)
            vals.append(1.0)
            for jj in range(d_x):
                if gk * c_lin[jj]:
                    rows.append(rows_k)
                    cols.append(int(x_idx[jj]))
                    vals.append(-gk * float(c_lin[jj]))
            for jj in range(d_y):
                if gk * f[jj]:
                    rows.append(rows_k)
                    cols.append(int(y[jj]))
                    vals.append(-gk * float(f[jj]))
            offs.append(-float(bk))
        env_blocks.append(ed.add_block(rows, cols, vals, offs, "nonneg"))
    prog = ed.program(sense="min")
    if use_soc_rewrite:
        prog = exp_to_soc(prog, 14)
        tol = max(tol, 1e-7)
    res = solve(prog, tol)
    if res.status == "infeasible":
        bad = _first_infeasible_scenario(cost, X)
        return RobustSolution(x=None, value=None, status="infeasible",
                              meta={"scenario": bad})
    if res.status != "optimal":
        return RobustSolution(x=None, value=None, status=res.status)
    return RobustSolution(
        x=res.x[x_idx],
        value=res.value,
        status="optimal",
        gap=res.residuals.get("gap", float("nan")),
    )


def _decision_rows(ed: ProgramEditor, X: Polyhedron, x_idx):
    from .univariate import _polyhedron_rows

    _polyhedron_rows(ed, X, x_idx)


def _first_infeasible_scenario(cost: ScenarioTwoStageCost, X: Polyhedron):
    from scipy import optimize

    for j, sc in enumerate(cost.scenarios):
        A = np.asarray(sc["A"], dtype=float)
        B = np.asarray(sc["B"], dtype=float)
        bb = np.asarray(sc["b"], dtype=float)
        d_x, d_y = A.shape[1], B.shape[1]
        A_eq = np.hstack([A, B])
        lb = X.lb if X.lb is not None else np.zeros(d_x)
        ub = X.ub if X.ub is not None else np.full(d_x, np.inf)
        bounds = [(lb[k], None if np.isinf(ub[k]) else ub[k]) for k in range(d_x)]
        bounds += [(0, None)] * d_y
        res = optimize.linprog(
            np.zeros(d_x + d_y),
            A_eq=A_eq, b_eq=bb,
            A_ub=None if X.A_ub is None else np.hstack([X.A_ub, np.zeros((X.A_ub.shape[0], d_y))]),
            b_ub=X.b_ub,
            bounds=bounds, method="highs",
        )
        if res.status != 0:
            return j
    return None

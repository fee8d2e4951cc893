"""Multivariate worst-case expectations: marginal composition and the hinge-gap set.

Two routes. For costs separable across coordinates, the uncertainty set is a
product of per-coordinate confidence regions and each coordinate contributes
its own dual block to one joint program sharing the decision. For joint
distributions, the hinge-gap (linear-convex-ordering) confidence region
admits a finite LP whose size is linear in N and exponential only in the
number K of concave cost pieces (branch set {0,1}^K minus the origin).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ._validation import ConfigurationError
from .cones import ProgramEditor, solve
from .costs import BilinearPieces, CvarPortfolioCost, Polyhedron, SeparableCost
from .discrete import DiscreteDus, _chi2_skeleton, _gtest_skeleton
from .gof import Threshold
from .samples import SampleSet
from .solution import RobustSolution
from .univariate import (
    UnivariateDus,
    _Envelope,
    _phi_tag,
    _polyhedron_rows,
    append_dus_dual,
    append_envelopes,
)

_MAX_PIECES = 12


# ---------------------------------------------------------------------------
# marginal composition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginalDus:
    """Product of per-coordinate confidence regions at significances alpha_i."""

    coords: Tuple[Union[UnivariateDus, DiscreteDus], ...]

    def __post_init__(self):
        if len(self.coords) < 1:
            raise ConfigurationError("need at least one coordinate region")
        if sum(self.alphas) >= 1.0:
            raise ConfigurationError("total significance must stay below 1")

    @property
    def alphas(self) -> Tuple[float, ...]:
        out = []
        for c in self.coords:
            if isinstance(c, UnivariateDus):
                out.append(c.total_alpha)
            else:
                out.append(c.q.alpha)
        return tuple(out)

    @property
    def d(self) -> int:
        return len(self.coords)


def marginal_robust_minimize(
    cost: SeparableCost, dus: MarginalDus, X: Polyhedron, tol: float = 1e-8
) -> RobustSolution:
    """min over x in X of the sum of per-coordinate worst-case expectations.

    Each coordinate contributes its own dual block (continuous or discrete)
    to a single conic program; the decision vector is shared.
    """
    if cost.d != dus.d:
        raise ConfigurationError("cost and uncertainty set dimension mismatch")
    ed = ProgramEditor()
    x_idx = ed.add_vars(X.dim)
    _polyhedron_rows(ed, X, x_idx)
    stat_handles = []
    for i, (ci, region) in enumerate(zip(cost.coord_costs, dus.coords)):
        xi_decision = np.array([x_idx[cost.decision_index[i]]])
        if isinstance(region, UnivariateDus):
            c_idx, eta, stat_block = append_dus_dual(ed, region)
            ok = append_envelopes(ed, ci, region, c_idx, xi_decision, eta)
            if not ok:
                return RobustSolution(x=None, value=None, status="unbounded",
                                      meta={"coordinate": i})
            stat_handles.append(("edf", stat_block))
        else:
            c_idx = (_chi2_skeleton(ed, region) if region.kind == "chi2"
                     else _gtest_skeleton(ed, region))
            env = _Envelope(ed, ci, xi_decision, 0, None, None,
                            support_lo=float(region.phat.atoms.min()))
            for j, atom in enumerate(region.phat.atoms[:, 0]):
                env.c = int(c_idx[j])
                env.emit(float(atom), float(atom))
            env.flush()
            stat_handles.append(("discrete", None))
    res = solve(ed.program(sense="min"), tol)
    if res.status != "optimal":
        return RobustSolution(x=None, value=None, status=res.status)
    return RobustSolution(
        x=res.x[x_idx], value=res.value, status="optimal",
        gap=res.residuals.get("gap", float("nan")),
    )


# ---------------------------------------------------------------------------
# hinge-gap (LCX) region
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LcxDus:
    """Hinge-gap confidence region around a multivariate sample.

    The primary leg bounds the hinge-gap statistic by q_c (significance
    alpha1). The optional second-moment leg (q_r at alpha2) only matters
    for bounded supports: with sub-quadratic costs on unbounded supports the
    reformulation is exact with the leg ignored, so it defaults to None.
    """

    data: SampleSet
    q_c: Threshold
    q_r: Optional[Threshold] = None

    def __post_init__(self):
        if self.q_c.value < 0:
            raise ConfigurationError("q_c must be nonnegative")


def _as_pieces(cost) -> BilinearPieces:
    if isinstance(cost, CvarPortfolioCost):
        return cost.bilinear_pieces()
    if isinstance(cost, BilinearPieces):
        return cost
    raise ConfigurationError(f"unsupported cost type {type(cost).__name__}")


def _branch_set(K: int):
    return [g for g in itertools.product((0, 1), repeat=K) if any(g)]


def _build_lcx_lp(cost: BilinearPieces, data: SampleSet, nu: float, eta: float,
                  x_fixed=None, X: Optional[Polyhedron] = None):
    K, d, N = cost.K, cost.d, data.N
    if K > _MAX_PIECES:
        raise ConfigurationError(
            f"{K} cost pieces require 2^{K} branch blocks; the limit is {_MAX_PIECES}"
        )
    branches = _branch_set(K)
    G = len(branches)
    xi = data.points
    ed = ProgramEditor()
    r = ed.add_vars(1, obj=eta)[0]
    f = ed.add_vars(1, obj=nu)[0]
    ed.add_block([0], [f], [1.0], [0.0], "nonneg")
    w = [ed.add_vars(d) for _ in range(G)]
    wp = [ed.add_vars(1)[0] for _ in range(G)]
    y = [ed.add_vars(d) for _ in range(G)]
    yp = [ed.add_vars(1)[0] for _ in range(G)]
    z = [ed.add_vars(N, obj=1.0) for _ in range(G)]
    g_vars = ed.add_vars(K)
    if x_fixed is None:
        x_idx = ed.add_vars(cost.x_dim)
        if X is not None:
            _polyhedron_rows(ed, X, x_idx)
    else:
        x_idx = None
        x_val = np.asarray(x_fixed, dtype=float)

    for gi in range(G):
        # z_{g,i} >= (w_g' xi_i - wp_g)/N  and z >= 0
        rows, cols, vals = [], [], []
        for i in range(N):
            rows.append(i)
            cols.append(int(z[gi][i]))
            vals.append(1.0)
            for j in range(d):
                if xi[i, j]:
                    rows.append(i)
                    cols.append(int(w[gi][j]))
                    vals.append(-xi[i, j] / N)
            rows.append(i)
            cols.append(int(wp[gi]))
            vals.append(1.0 / N)
        ed.add_block(rows, cols, vals, np.zeros(N), "nonneg")
        ed.add_block(np.arange(N), z[gi], np.ones(N), np.zeros(N), "nonneg")
        # absolute-value splits: y >= |w|, yp >= |wp|
        rows = np.concatenate([np.arange(d), np.arange(d, 2 * d),
                               [2 * d], [2 * d + 1]])
        cols = np.concatenate([y[gi], y[gi], [yp[gi]], [yp[gi]]])
        vals = np.ones(2 * d + 2)
        rows2 = np.concatenate([np.arange(d), np.arange(d, 2 * d),
                                [2 * d], [2 * d + 1]])
        cols2 = np.concatenate([w[gi], w[gi], [wp[gi]], [wp[gi]]])
        vals2 = np.concatenate([-np.ones(d), np.ones(d), [-1.0], [1.0]])
        ed.add_block(np.concatenate([rows, rows2]), np.concatenate([cols, cols2]),
                     np.concatenate([vals, vals2]), np.zeros(2 * d + 2), "nonneg")
    # f >= sum_g (sum_j y_gj + yp_g)
    cols = [int(f)] + [int(c) for gi in range(G) for c in y[gi]] + [int(yp[gi]) for gi in range(G)]
    vals = [1.0] + [-1.0] * (G * d) + [-1.0] * G
    ed.add_block(np.zeros(len(cols), dtype=int), cols, vals, [0.0], "nonneg")

    poly = cost.B is not None
    for k in range(K):
        p0, p1, p2, P = cost.piece_arrays(k)
        # g_k - sum_g gamma_k wp_g + r >= 0
        cols = [int(g_vars[k]), int(r)] + [int(wp[gi]) for gi in range(G) if branches[gi][k]]
        vals = [1.0, 1.0] + [-1.0] * sum(1 for gi in range(G) if branches[gi][k])
        ed.add_block(np.zeros(len(cols), dtype=int), cols, vals, [0.0], "nonneg")
        # conjugate rows
        hk_cols = [[int(w[gi][j]) for gi in range(G) if branches[gi][k]] for j in range(d)]
        if not poly:
            # sum_g gamma_k w_g = p2 + P' x (zero rows)
            rows, cols, vals, offs = [], [], [], []
            for j in range(d):
                for cc in hk_cols[j]:
                    rows.append(j)
                    cols.append(cc)
                    vals.append(1.0)
                if x_idx is not None:
                    for jj in range(cost.x_dim):
                        if P[jj, j]:
                            rows.append(j)
                            cols.append(int(x_idx[jj]))
                            vals.append(-float(P[jj, j]))
                    offs.append(-float(p2[j]))
                else:
                    offs.append(-float(p2[j] + P.T[j] @ x_val))
            ed.add_block(rows, cols, vals, offs, "zero")
            # g_k <= -p0 - p1' x
            cols = [int(g_vars[k])]
            vals = [-1.0]
            off = -float(p0)
            if x_idx is not None:
                for jj in range(cost.x_dim):
                    if p1[jj]:
                        cols.append(int(x_idx[jj]))
                        vals.append(-float(p1[jj]))
            else:
                off -= float(p1 @ x_val)
            ed.add_block(np.zeros(len(cols), dtype=int), cols, vals, [off], "nonneg")
        else:
            B = np.asarray(cost.B, dtype=float)
            bvec = np.asarray(cost.b, dtype=float)
            m = B.shape[0]
            rho = ed.add_vars(m)
            ed.add_block(np.arange(m), rho, np.ones(m), np.zeros(m), "nonneg")
            # B' rho - sum_g gamma_k w_g + p2 + P' x = 0
            rows, cols, vals, offs = [], [], [], []
            for j in range(d):
                for i_r in range(m):
                    if B[i_r, j]:
                        rows.append(j)
                        cols.append(int(rho[i_r]))
                        vals.append(float(B[i_r, j]))
                for cc in hk_cols[j]:
                    rows.append(j)
                    cols.append(cc)
                    vals.append(-1.0)
                if x_idx is not None:
                    for jj in range(cost.x_dim):
                        if P[jj, j]:
                            rows.append(j)
                            cols.append(int(x_idx[jj]))
                            vals.append(float(P[jj, j]))
                    offs.append(float(p2[j]))
                else:
                    offs.append(float(p2[j] + P.T[j] @ x_val))
            ed.add_block(rows, cols, vals, offs, "zero")
            # g_k <= -p0 - p1' x + b' rho
            cols = [int(g_vars[k])] + [int(rho[i_r]) for i_r in range(m) if bvec[i_r]]
            vals = [-1.0] + [float(bvec[i_r]) for i_r in range(m) if bvec[i_r]]
            off = -float(p0)
            if x_idx is not None:
                for jj in range(cost.x_dim):
                    if p1[jj]:
                        cols.append(int(x_idx[jj]))
                        vals.append(-float(p1[jj]))
            else:
                off -= float(p1 @ x_val)
            ed.add_block(np.zeros(len(cols), dtype=int), cols, vals, [off], "nonneg")
    return ed, x_idx


def lcx_value(x, cost, dus: LcxDus, nu: Optional[float] = None,
              eta: float = 1.0, tol: float = 1e-8) -> float:
    """Certified upper bound C'(x; nu, eta) on the worst-case expected cost.

    Defaults to nu = q_c, eta = 1, the exact worst case whenever the support
    is unbounded and the cost's negative part is sub-quadratic (true for all
    bilinear piece costs).
    """
    pieces = _as_pieces(cost)
    if pieces.d != dus.data.d:
        raise ConfigurationError("cost and data dimension mismatch")
    nu = dus.q_c.value if nu is None else float(nu)
    ed, _ = _build_lcx_lp(pieces, dus.data, nu, eta, x_fixed=x)
    res = solve(ed.program(sense="min"), tol)
    if res.status != "optimal":
        raise ConfigurationError(f"hinge-gap LP did not solve: {res.status}")
    return float(res.value)


def lcx_bounds(x, cost, dus: LcxDus, xi_prime) -> Tuple[float, float]:
    """Upper and lower bounds bracketing the worst case (bounded-support use).

    Requires the second-moment leg; the lower bound depends on the chosen
    reference point xi_prime in the support, for which no selection rule is
    asserted.
    """
    if dus.q_r is None:
        raise ConfigurationError("lcx_bounds needs the second-moment leg q_r")
    pieces = _as_pieces(cost)
    xi_prime = np.asarray(xi_prime, dtype=float)
    norm2 = float(xi_prime @ xi_prime)
    if norm2 <= 0:
        raise ConfigurationError("xi_prime must be nonzero")
    upper = lcx_value(x, cost, dus)
    q_r = dus.q_r.value
    nu_lo = dus.q_c.value - (np.sqrt(norm2) + 1.0) / norm2 * q_r
    eta_lo = 1.0 - q_r / norm2
    cx = float(pieces.evaluate(np.asarray(x, dtype=float), xi_prime[None, :])[0])
    lower = lcx_value(x, cost, dus, nu=nu_lo, eta=eta_lo) - cx / norm2
    return upper, lower


def lcx_robust_minimize(cost, X: Polyhedron, dus: LcxDus,
                        tol: float = 1e-8) -> RobustSolution:
    """min over x in X of C'(x; q_c, 1) as one joint LP."""
    pieces = _as_pieces(cost)
    if pieces.d != dus.data.d:
        raise ConfigurationError("cost and data dimension mismatch")
    ed, x_idx = _build_lcx_lp(pieces, dus.data, dus.q_c.value, 1.0,
                              x_fixed=None, X=X)
    res = solve(ed.program(sense="min"), tol)
    if res.status != "optimal":
        return RobustSolution(x=None, value=None, status=res.status)
    return RobustSolution(
        x=res.x[x_idx], value=res.value, status="optimal",
        gap=res.residuals.get("gap", float("nan")),
    )

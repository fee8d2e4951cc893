"""Single-level reformulations of worst-case expectations over EDF confidence regions.

The distributional uncertainty set for univariate data is the set of CDFs
whose EDF statistic against the sample stays below a threshold, optionally
intersected with a generalized-moment band |E phi - sample mean| <= Q_M
(required whenever the support is unbounded on a side where the cost is,
otherwise the worst case is infinite).

The inner supremum over distributions is dualized mechanically into a
minimization; augmenting the decision variable yields one conic program.
Worst-case distributions are recovered from the duals of the stationarity
rows: at most N+1 atoms, one per gap between consecutive order statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from ._validation import ConfigurationError, DomainError
from .cones import (
    ConeBlock,
    ConeProgram,
    ProgramEditor,
    block_from_coo,
    dualize_inner_max,
    solve,
)
from .costs import MaxBilinearCost, NewsvendorCost, Polyhedron, TwoStageCost1D
from .gof import (
    EDF_KINDS,
    Threshold,
    edf_statistic,
    minimal_edf_statistic,
    resolve_phi,
    student_t_moment_threshold,
)
from .samples import SampleSet, SupportSpec
from .solution import RobustSolution


class ClosedFormInapplicable(Exception):
    """The closed-form preconditions fail; callers should use robust_minimize."""


def add_nonneg_quadratic(ed: ProgramEditor, quad, lin, const, lo, hi):
    """Rows forcing quad xi^2 + lin xi + const >= 0 for all xi in [lo, hi].

    quad/lin/const are affine expressions ([(col, val), ...], offset) in the
    editor's variables. Uses the classical nonnegative-polynomial
    decomposition on an interval/half-line/line: one rotated second-order
    cone plus sign constraints, exact for quadratics.
    """

    def combine(scale_quad, scale_lin, scale_const, extra=()):
        terms = {}
        off = 0.0
        for (expr, scale) in ((quad, scale_quad), (lin, scale_lin), (const, scale_const)):
            cols_vals, e_off = expr
            off += scale * e_off
            for cc, vv in cols_vals:
                terms[cc] = terms.get(cc, 0.0) + scale * vv
        for cc, vv in extra:
            terms[cc] = terms.get(cc, 0.0) + vv
        cols = list(terms)
        vals = [terms[cc] for cc in cols]
        return cols, vals, off

    s0, s1, s2 = ed.add_vars(3)
    finite_lo, finite_hi = np.isfinite(lo), np.isfinite(hi)
    if finite_lo and finite_hi:
        t = ed.add_vars(1)[0]
        L = hi - lo
        rows = [
            combine(L * L, 0.0, 0.0, extra=[(int(s2), -1.0), (int(t), 1.0)]),
            combine(2 * lo * L, L, 0.0, extra=[(int(s1), -1.0), (int(t), -1.0)]),
            combine(lo * lo, lo, 1.0, extra=[(int(s0), -1.0)]),
        ]
        nonneg = [s0, s2, t]
    elif finite_lo or finite_hi:
        t = ed.add_vars(1)[0]
        base, sgn = (lo, 1.0) if finite_lo else (hi, -1.0)
        rows = [
            combine(1.0, 0.0, 0.0, extra=[(int(s2), -1.0)]),
            combine(2 * base * sgn, sgn, 0.0, extra=[(int(s1), -1.0), (int(t), -1.0)]),
            combine(base * base, base, 1.0, extra=[(int(s0), -1.0)]),
        ]
        nonneg = [s0, s2, t]
    else:
        rows = [
            combine(1.0, 0.0, 0.0, extra=[(int(s2), -1.0)]),
            combine(0.0, 1.0, 0.0, extra=[(int(s1), -1.0)]),
            combine(0.0, 0.0, 1.0, extra=[(int(s0), -1.0)]),
        ]
        nonneg = [s0, s2]
    for cols, vals, off in rows:
        ed.add_block(np.zeros(len(cols), dtype=int), cols, vals, [off], "zero")
    ed.add_block(np.arange(len(nonneg)), nonneg, np.ones(len(nonneg)),
                 np.zeros(len(nonneg)), "nonneg")
    # s1^2 <= 4 s0 s2 via (s0 + s2, s1, s0 - s2) in SOC3
    ed.add_block([0, 0, 1, 2, 2], [s0, s2, s1, s0, s2], [1.0, 1.0, 1.0, 1.0, -1.0],
                 [0.0, 0.0, 0.0], "soc")


# ---------------------------------------------------------------------------
# uncertainty set
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentLeg:
    """Generalized-moment band |E_F0 phi - mu_hat| <= q_m at significance alpha2."""

    phi: object  # "identity" | "abs" | "square" | callable (with oracle rows)
    alpha2: float
    q_m: Threshold
    mu_hat: float


@dataclass(frozen=True)
class UnivariateDus:
    """EDF confidence region (optionally moment-augmented) around a sample."""

    data: SampleSet
    kind: str
    alpha1: float
    q_edf: Threshold
    support: SupportSpec
    moment: Optional[MomentLeg] = None

    def __post_init__(self):
        if self.kind not in EDF_KINDS:
            raise ConfigurationError(f"unknown EDF kind {self.kind!r}")
        if self.data.d != 1:
            raise ConfigurationError("UnivariateDus requires univariate data")
        if self.support.kind != "interval":
            raise ConfigurationError("UnivariateDus requires an interval support")
        v = self.data.values
        if v[0] < self.support.lo or v[-1] > self.support.hi:
            raise DomainError("data must lie inside the declared support")

    @staticmethod
    def from_sample(
        data: SampleSet,
        kind: str,
        alpha1: float,
        q_edf: Threshold,
        support: SupportSpec,
        phi=None,
        alpha2: float = 0.05,
        q_m: Optional[Threshold] = None,
    ) -> "UnivariateDus":
        """Assemble the DUS; a moment leg is attached when `phi` is given.

        The default moment threshold is the Student-T approximation
        sigma_hat t_{N-1}(alpha2 / 2) / sqrt(N).
        """
        moment = None
        if phi is not None:
            if q_m is None:
                q_m = student_t_moment_threshold(data, phi, alpha2)
            mu_hat = float(np.mean(resolve_phi(phi)(data.values)))
            moment = MomentLeg(phi=phi, alpha2=alpha2, q_m=q_m, mu_hat=mu_hat)
        return UnivariateDus(data=data, kind=kind, alpha1=alpha1, q_edf=q_edf,
                             support=support, moment=moment)

    @property
    def total_alpha(self) -> float:
        return self.alpha1 + (self.moment.alpha2 if self.moment else 0.0)

    def interval_edges(self) -> np.ndarray:
        """xi_(0) = lo, xi_(1..N), xi_(N+1) = hi."""
        return np.concatenate([[self.support.lo], self.data.values, [self.support.hi]])


# ---------------------------------------------------------------------------
# cone data for the statistic constraint
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EdfConeData:
    """Blocks over (zeta_1..zeta_N, aux) whose feasibility is S_N(zeta) <= Q."""

    blocks: Tuple[ConeBlock, ...]
    n_vars: int
    n_aux: int


def edf_cone_data(kind: str, N: int, q: float) -> EdfConeData:
    """Conic representation of {zeta : S_N(zeta) <= q}.

    KS and Kuiper are polyhedral (Kuiper through one auxiliary scalar s with
    x_i >= s, y_i >= -s realizing the min-sum cone); CvM and Watson are one
    second-order cone each; Anderson-Darling uses 2N exponential cones for
    the per-point logarithms plus one aggregating row.
    """
    if kind not in EDF_KINDS:
        raise ConfigurationError(f"unknown EDF kind {kind!r}")
    if q < 0:
        raise ConfigurationError("threshold must be nonnegative")
    i = np.arange(1, N + 1)
    if kind == "ks":
        rows = np.arange(2 * N)
        cols = np.concatenate([i - 1, i - 1])
        vals = np.concatenate([np.ones(N), -np.ones(N)])
        b = np.concatenate([q - i / N, q + (i - 1) / N])
        blk = block_from_coo(rows, cols, vals, b, N, "nonneg")
        return EdfConeData(blocks=(blk,), n_vars=N, n_aux=0)
    if kind == "kuiper":
        n = N + 1  # aux scalar s at index N
        rows = np.concatenate([np.arange(N), np.arange(N), np.arange(N, 2 * N), np.arange(N, 2 * N)])
        cols = np.concatenate([i - 1, np.full(N, N), i - 1, np.full(N, N)])
        vals = np.concatenate([np.ones(N), -np.ones(N), -np.ones(N), np.ones(N)])
        b = np.concatenate([q / 2 - i / N, q / 2 + (i - 1) / N])
        blk = block_from_coo(rows, cols, vals, b, n, "nonneg")
        return EdfConeData(blocks=(blk,), n_vars=n, n_aux=1)
    mid = (2 * i - 1) / (2.0 * N)
    if kind in ("cvm", "watson"):
        radius2 = N * q * q - 1.0 / (12.0 * N)
        head = math.sqrt(radius2) if radius2 >= 0 else -1.0
        if kind == "cvm":
            A = sparse.vstack([sparse.csr_matrix((1, N)), sparse.identity(N, format="csr")])
            b = np.concatenate([[head], -mid])
        else:
            centering = sparse.identity(N, format="csr") - sparse.csr_matrix(np.full((N, N), 1.0 / N))
            A = sparse.vstack([sparse.csr_matrix((1, N)), centering])
            b = np.concatenate([[head], -(mid - 0.5)])
        blk = ConeBlock(A=sparse.csr_matrix(A), b=b, cone="soc")
        return EdfConeData(blocks=(blk,), n_vars=N, n_aux=0)
    # Anderson-Darling: aux tau (N), sigma (N); zeta at 0..N-1, tau at N..2N-1,
    # sigma at 2N..3N-1. Constraints: (tau_i, 1, zeta_i) in exp,
    # (sigma_i, 1, 1 - zeta_i) in exp, and
    # sum_i [(2i-1) tau_i + (2(N-i)+1) sigma_i] / N^2 + 1 + q^2 >= 0.
    n = 3 * N
    blocks: List[ConeBlock] = []
    arg_range = (1.0 + q * q) * N * N + 40.0
    for j in range(N):
        rows = [0, 2]
        cols = [N + j, j]
        vals = [1.0, 1.0]
        blocks.append(block_from_coo(rows, cols, vals, [0.0, 1.0, 0.0], n, "exp",
                                     exp_arg_range=arg_range))
        rows = [0, 2]
        cols = [2 * N + j, j]
        vals = [1.0, -1.0]
        blocks.append(block_from_coo(rows, cols, vals, [0.0, 1.0, 1.0], n, "exp",
                                     exp_arg_range=arg_range))
    w_lo = (2 * i - 1) / N**2
    w_hi = (2 * (N - i) + 1) / N**2
    rows = np.zeros(2 * N)
    cols = np.concatenate([N + i - 1, 2 * N + i - 1])
    vals = np.concatenate([w_lo, w_hi])
    blocks.append(block_from_coo(rows, cols, vals, [1.0 + q * q], n, "nonneg"))
    return EdfConeData(blocks=tuple(blocks), n_vars=n, n_aux=2 * N)


def inner_primal(dus: UnivariateDus, payoffs) -> ConeProgram:
    """Worst-case expectation over the (bounded, momentless) DUS as a max over zeta.

    payoffs[i] is the per-interval supremum of the cost over
    [xi_(i-1), xi_(i)]; the objective telescopes to
    sum_i zeta_i (payoff_i - payoff_{i+1}) + payoff_{N+1}.
    """
    if dus.moment is not None:
        raise ConfigurationError("inner_primal covers only the momentless case")
    payoffs = np.asarray(payoffs, dtype=float)
    N = dus.data.N
    if len(payoffs) != N + 1:
        raise ConfigurationError("need one payoff per inter-order-statistic interval")
    cone = edf_cone_data(dus.kind, N, dus.q_edf.value)
    ed = ProgramEditor()
    zeta = ed.add_vars(cone.n_vars)
    ed.add_objective(zeta[:N], payoffs[:-1] - payoffs[1:])
    ed.c0 = float(payoffs[-1])
    for blk in cone.blocks:
        co = blk.A.tocoo()
        ed.add_block(co.row, co.col, co.data, blk.b, blk.cone, blk.exp_arg_range)
    # probability chain: zeta_1 >= 0, zeta_{i+1} >= zeta_i, zeta_N <= 1
    rows = np.concatenate([[0], np.repeat(np.arange(1, N), 2), [N]])
    cols = np.concatenate([[0], np.column_stack([np.arange(1, N), np.arange(N - 1)]).ravel(), [N - 1]])
    vals = np.concatenate([[1.0], np.tile([1.0, -1.0], N - 1), [-1.0]])
    b = np.concatenate([np.zeros(N), [1.0]])
    ed.add_block(rows, cols, vals, b, "nonneg")
    return ed.program(sense="max")


def slater_zeta(dus: UnivariateDus) -> np.ndarray:
    """Strictly feasible inner point: the midpoint CDF values (plus aux)."""
    N = dus.data.N
    mids = (2 * np.arange(1, N + 1) - 1) / (2.0 * N)
    if dus.kind == "kuiper":
        return np.concatenate([mids, [0.0]])
    if dus.kind == "ad":
        margin = 1e-6
        return np.concatenate([mids, np.log(mids) - margin, np.log(1 - mids) - margin])
    return mids


# ---------------------------------------------------------------------------
# envelope rows
# ---------------------------------------------------------------------------


class _Envelope:
    """Emits rows enforcing c_i >= sup over an interval of (cost - eta phi)."""

    def __init__(self, editor: ProgramEditor, cost, x_idx, c_idx, eta_idx, phi_tag, support_lo):
        self.ed = editor
        self.cost = cost
        self.x = np.atleast_1d(x_idx)
        self.c = int(c_idx)
        self.eta = eta_idx  # (t_index, s_index) or None
        self.phi = phi_tag
        self.support_lo = support_lo
        self.rows: List[Tuple[List[int], List[float], float]] = []  # nonneg rows
        self.unbounded = False

    # -- helpers ------------------------------------------------------------

    def _phi_val(self, xi):
        if self.phi is None:
            return 0.0
        if self.phi == "identity":
            return xi
        if self.phi == "abs":
            return abs(xi)
        if self.phi == "square":
            return xi * xi
        raise ConfigurationError("user phi requires an interval-maximization oracle")

    def _affine_row(self, x_coefs, const, xi):
        """c - x_coefs' x + eta phi(xi) - const >= 0."""
        cols = [self.c]
        vals = [1.0]
        for j, coef in zip(self.x, np.atleast_1d(x_coefs)):
            if coef != 0.0:
                cols.append(int(j))
                vals.append(-float(coef))
        if self.eta is not None:
            pv = self._phi_val(xi)
            if pv != 0.0:
                t, s = self.eta
                cols += [t, s]
                vals += [pv, -pv]
        self.rows.append((cols, vals, -float(const)))

    def _eta_floor(self, slope, phi_slope):
        """eta * phi_slope >= slope, needed for a finite sup on an infinite side."""
        if self.eta is None or phi_slope <= 0:
            if slope > 0:
                self.unbounded = True
            return
        t, s = self.eta
        self.rows.append(([t, s], [phi_slope, -phi_slope], -float(slope)))

    # -- per-model emission ---------------------------------------------------

    def emit(self, lo, hi):
        cost = self.cost
        if isinstance(cost, NewsvendorCost):
            pieces = [
                (np.array([-cost.b]), 0.0, cost.b),   # b(xi - x): x-coef -b, slope b
                (np.array([cost.h]), 0.0, -cost.h),   # h(x - xi): x-coef h, slope -h
            ]
            self._emit_linear_pieces(pieces, lo, hi)
            return
        if isinstance(cost, MaxBilinearCost):
            pieces = []
            for p0, p1, p2, p3 in cost.pieces:
                pieces.append((np.asarray(p1, dtype=float), float(p0), float(p2),
                               np.asarray(p3, dtype=float)))
            self._emit_bilinear_pieces(pieces, lo, hi)
            return
        if isinstance(cost, TwoStageCost1D):
            self._emit_two_stage(cost, lo, hi)
            return
        raise ConfigurationError(f"no envelope rows for cost type {type(cost).__name__}")

    def _endpoints(self, lo, hi):
        pts = [p for p in (lo, hi) if np.isfinite(p)]
        if self.phi == "abs" and np.isfinite(lo) and np.isfinite(hi) and lo < 0 < hi:
            pts.append(0.0)
        return pts

    def _emit_linear_pieces(self, pieces, lo, hi):
        """pieces: (x_coefs, const, xi_slope) with value x_coefs' x + const + slope xi."""
        if self.phi == "square":
            for x_coefs, const, slope in pieces:
                self._sos_rows(x_coefs, const, slope, lo, hi)
            return
        if self.phi == "identity" and self.support_lo < 0:
            raise ConfigurationError("phi=identity requires nonnegative support; use abs")
        for x_coefs, const, slope in pieces:
            for xi in self._endpoints(lo, hi):
                self._affine_row(x_coefs, const + slope * xi, xi)
            if not np.isfinite(hi):
                self._eta_floor(slope, self._phi_right_slope())
            if not np.isfinite(lo):
                self._eta_floor(-slope, self._phi_left_slope())

    def _phi_right_slope(self):
        return 1.0 if self.phi in ("identity", "abs") else 0.0

    def _phi_left_slope(self):
        if self.phi == "abs":
            return 1.0
        return 0.0  # identity decreases to the left; square handled separately

    def _emit_bilinear_pieces(self, pieces, lo, hi):
        single_row_ok = self.eta is None
        for p1, p0, p2, p3 in pieces:
            x_dep_slope = np.any(p3 != 0)
            if self.phi == "square":
                if x_dep_slope:
                    self._sos_rows_bilinear(p1, p0, p2, p3, lo, hi)
                else:
                    self._sos_rows(p1, p0, p2, lo, hi)
                continue
            if single_row_ok and not x_dep_slope and np.isfinite(lo) and np.isfinite(hi):
                # fully linear piece over a compact interval: one max-endpoint row
                xi = lo if p2 * lo >= p2 * hi else hi
                self._affine_row(p1, p0 + p2 * xi, xi)
                continue
            for xi in self._endpoints(lo, hi):
                coefs = p1 + p3 * xi
                self._affine_row(coefs, p0 + p2 * xi, xi)
            if not np.isfinite(hi):
                if x_dep_slope:
                    self._slope_cap(p2, p3, +1.0)
                else:
                    self._eta_floor(p2, self._phi_right_slope())
            if not np.isfinite(lo):
                if x_dep_slope:
                    self._slope_cap(p2, p3, -1.0)
                else:
                    self._eta_floor(-p2, self._phi_left_slope())

    def _slope_cap(self, p2, p3, direction):
        """eta phi' - direction (p2 + p3' x) >= 0 for x-dependent slopes."""
        phi_slope = self._phi_right_slope() if direction > 0 else self._phi_left_slope()
        cols, vals = [], []
        if self.eta is not None and phi_slope > 0:
            t, s = self.eta
            cols += [t, s]
            vals += [phi_slope, -phi_slope]
        for j, coef in zip(self.x, np.atleast_1d(p3)):
            if coef != 0.0:
                cols.append(int(j))
                vals.append(-direction * float(coef))
        if not cols:
            if direction * p2 > 0:
                self.unbounded = True
            return
        self.rows.append((cols, vals, -direction * float(p2)))

    def _sos_rows(self, x_coefs, const, slope, lo, hi):
        """Rows for c >= sup (x_coefs' x + const + slope xi - eta xi^2).

        Encoded as the quadratic eta xi^2 - slope xi + (c - x_coefs' x - const)
        being nonnegative on the interval.
        """
        if self.eta is None:
            raise ConfigurationError("phi=square rows need a moment leg")
        t, s = self.eta
        quad = ([(int(t), 1.0), (int(s), -1.0)], 0.0)
        lin = ([], -float(slope))
        const_cols = [(self.c, 1.0)]
        for j, coef in zip(self.x, np.atleast_1d(x_coefs)):
            if coef != 0.0:
                const_cols.append((int(j), -float(coef)))
        add_nonneg_quadratic(self.ed, quad, lin, (const_cols, -float(const)), lo, hi)

    def _sos_rows_bilinear(self, p1, p0, p2, p3, lo, hi):
        raise ConfigurationError(
            "phi=square with xi-x cross terms is not supported; use phi=abs"
        )

    def _emit_two_stage(self, cost: TwoStageCost1D, lo, hi):
        if self.eta is not None:
            raise ConfigurationError("two-stage costs do not support a moment leg")
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ConfigurationError("two-stage costs require a compact support")
        ed = self.ed
        f = np.asarray(cost.f, dtype=float)
        g = np.asarray(cost.g, dtype=float)
        A = np.asarray(cost.A, dtype=float)
        B = np.asarray(cost.B, dtype=float)
        bb = np.asarray(cost.b, dtype=float)
        p = np.asarray(cost.p, dtype=float)
        c_lin = np.asarray(cost.c, dtype=float)
        d_y = B.shape[1]
        if cost.mode == "rhs-only":
            # convex pieces: endpoint recourse with one y per endpoint
            for xi in (lo, hi):
                y = ed.add_vars(d_y)
                ed.add_block(np.arange(d_y), y, np.ones(d_y), np.zeros(d_y), "nonneg")
                co_rows, co_cols, co_vals = [], [], []
                for r in range(A.shape[0]):
                    for j, coef in zip(self.x, A[r]):
                        if coef:
                            co_rows.append(r)
                            co_cols.append(int(j))
                            co_vals.append(float(coef))
                    for jj in range(d_y):
                        if B[r, jj]:
                            co_rows.append(r)
                            co_cols.append(int(y[jj]))
                            co_vals.append(float(B[r, jj]))
                ed.add_block(co_rows, co_cols, co_vals, -(bb + p * xi), "zero")
                for gk, bk in zip(cost.gammas, cost.betas):
                    cols = [self.c]
                    vals = [1.0]
                    for j, coef in zip(self.x, c_lin):
                        if gk * coef != 0.0:
                            cols.append(int(j))
                            vals.append(-gk * float(coef))
                    for jj in range(d_y):
                        if gk * f[jj] != 0.0:
                            cols.append(int(y[jj]))
                            vals.append(-gk * float(f[jj]))
                    self.rows.append((cols, vals, -float(bk)))
        else:
            # concave pieces: interval-minimum recourse bound via one (y, kappa)
            y = ed.add_vars(d_y)
            kappa = ed.add_vars(1)[0]
            ed.add_block(np.arange(d_y), y, np.ones(d_y), np.zeros(d_y), "nonneg")
            co_rows, co_cols, co_vals = [], [], []
            for r in range(A.shape[0]):
                for j, coef in zip(self.x, A[r]):
                    if coef:
                        co_rows.append(r)
                        co_cols.append(int(j))
                        co_vals.append(float(coef))
                for jj in range(d_y):
                    if B[r, jj]:
                        co_rows.append(r)
                        co_cols.append(int(y[jj]))
                        co_vals.append(float(B[r, jj]))
            ed.add_block(co_rows, co_cols, co_vals, -bb, "zero")
            for xi in (lo, hi):
                cols = [int(y[jj]) for jj in range(d_y) if g[jj]] + [int(kappa)]
                vals = [xi * float(g[jj]) for jj in range(d_y) if g[jj]] + [-1.0]
                self.rows.append((cols, vals, 0.0))
            for gk, bk in zip(cost.gammas, cost.betas):
                cols = [self.c, int(kappa)]
                vals = [1.0, -gk]
                for j, coef in zip(self.x, c_lin):
                    if gk * coef != 0.0:
                        cols.append(int(j))
                        vals.append(-gk * float(coef))
                for jj in range(d_y):
                    if gk * f[jj] != 0.0:
                        cols.append(int(y[jj]))
                        vals.append(-gk * float(f[jj]))
                self.rows.append((cols, vals, -float(bk)))

    def flush(self):
        if not self.rows:
            return
        rows, cols, vals, b = [], [], [], []
        for r, (cc, vv, const) in enumerate(self.rows):
            for j, v in zip(cc, vv):
                rows.append(r)
                cols.append(j)
                vals.append(v)
            b.append(const)
        self.ed.add_block(rows, cols, vals, b, "nonneg")
        self.rows = []


def envelope_constraints(cost, interval, phi=None, x_dim=None):
    """Standalone view of the envelope rows for one interval.

    Returns a ConeProgram fragment over the variable order
    [c_i, x (x_dim), t, s, extras...] whose nonneg/zero/soc blocks encode
    c_i >= sup over the interval of (cost - (t - s) phi). Intended for
    inspection and tests; the solvers emit the same rows inline.
    """
    lo, hi = interval
    x_dim = cost.x_dim if x_dim is None else x_dim
    ed = ProgramEditor()
    c_idx = ed.add_vars(1)[0]
    x_idx = ed.add_vars(x_dim)
    eta = None
    if phi is not None:
        t, s = ed.add_vars(2)
        eta = (int(t), int(s))
    env = _Envelope(ed, cost, x_idx, c_idx, eta, phi, support_lo=lo)
    env.emit(lo, hi)
    env.flush()
    if env.unbounded:
        raise DomainError("interval supremum is infinite for every decision")
    ed.add_objective([c_idx], [1.0])
    # free selector so unused decision variables still appear in a block
    ed.add_block(np.arange(ed.n), np.arange(ed.n), np.ones(ed.n),
                 np.zeros(ed.n), "free")
    return ed.program()


# ---------------------------------------------------------------------------
# single-level robust solve
# ---------------------------------------------------------------------------


def _phi_tag(dus: UnivariateDus):
    return None if dus.moment is None else dus.moment.phi


class EmptyDus(Exception):
    """The threshold is below the smallest achievable statistic."""


def append_dus_dual(ed: ProgramEditor, dus: UnivariateDus):
    """Append the dual skeleton of the inner sup over the DUS to an editor.

    Returns (envelope variable indices c_1..c_{N+1}, eta handle or None,
    stationarity block index); the caller must add envelope rows tying the
    c variables to interval suprema of the cost.
    """
    N = dus.data.N
    if dus.q_edf.value < minimal_edf_statistic(dus.kind, N) - 1e-12:
        raise EmptyDus(f"threshold {dus.q_edf.value} is below the minimal "
                       f"{dus.kind} statistic at N={N}")
    cone = edf_cone_data(dus.kind, N, dus.q_edf.value)
    ed0 = ProgramEditor()
    ed0.add_vars(cone.n_vars)
    for blk in cone.blocks:
        co = blk.A.tocoo()
        ed0.add_block(co.row, co.col, co.data, blk.b, blk.cone, blk.exp_arg_range)
    rows = np.concatenate([[0], np.repeat(np.arange(1, N), 2), [N]])
    cols = np.concatenate([[0], np.column_stack([np.arange(1, N), np.arange(N - 1)]).ravel(), [N - 1]])
    vals = np.concatenate([[1.0], np.tile([1.0, -1.0], N - 1), [-1.0]])
    bchain = np.concatenate([np.zeros(N), [1.0]])
    ed0.add_block(rows, cols, vals, bchain, "nonneg")
    inner = ed0.program(sense="max")
    # parameterized objective: coefficient of zeta_i is theta_i - theta_{i+1}
    M = np.zeros((cone.n_vars, N + 1))
    M[np.arange(N), np.arange(N)] = 1.0
    M[np.arange(N), np.arange(1, N + 1)] = -1.0
    e = np.zeros(N + 1)
    e[N] = 1.0
    dual, layout = dualize_inner_max(inner, slater_zeta(dus), objective_param=(M, e))
    voff, boff = ed.absorb(dual)
    theta0 = voff + layout.theta_slice[0]
    c_idx = np.arange(theta0, theta0 + N + 1)
    stat_block = boff + layout.stationarity_block

    eta = None
    if dus.moment is not None:
        t, s = ed.add_vars(2)
        q_m = dus.moment.q_m.value
        mu = dus.moment.mu_hat
        ed.add_objective([t, s], [mu + q_m, -(mu - q_m)])
        ed.add_block([0, 1], [t, s], [1.0, 1.0], [0.0, 0.0], "nonneg")
        eta = (int(t), int(s))
    return c_idx, eta, stat_block


def append_envelopes(ed: ProgramEditor, cost, dus: UnivariateDus, c_idx, x_idx, eta):
    """Envelope rows for every inter-order-statistic interval; True if finite."""
    env = _Envelope(ed, cost, x_idx, 0, eta, _phi_tag(dus), support_lo=dus.support.lo)
    edges = dus.interval_edges()
    for i in range(dus.data.N + 1):
        env.c = int(c_idx[i])
        env.emit(edges[i], edges[i + 1])
    env.flush()
    return not env.unbounded


def _build_single_level(cost, X: Optional[Polyhedron], dus: UnivariateDus,
                        fixed_x=None):
    """Mechanical dual of the inner maximization, extended with envelopes and x."""
    ed = ProgramEditor()
    c_idx, eta, stat_block = append_dus_dual(ed, dus)
    x_dim = cost.x_dim
    x_idx = ed.add_vars(x_dim)
    if fixed_x is not None:
        fx = np.atleast_1d(np.asarray(fixed_x, dtype=float))
        ed.add_block(np.arange(x_dim), x_idx, np.ones(x_dim), -fx, "zero")
    elif X is not None:
        _polyhedron_rows(ed, X, x_idx)
    if not append_envelopes(ed, cost, dus, c_idx, x_idx, eta):
        return None, None, None
    return ed.program(sense="min"), stat_block, (c_idx, x_idx, eta)


def _polyhedron_rows(ed: ProgramEditor, X: Polyhedron, x_idx):
    def dense_block(Amat, bvec, cone, sign):
        Amat = np.asarray(Amat, dtype=float)
        bvec = np.asarray(bvec, dtype=float).reshape(-1)
        rows, cols, vals = [], [], []
        for r in range(Amat.shape[0]):
            for jloc, j in enumerate(x_idx):
                if Amat[r, jloc]:
                    rows.append(r)
                    cols.append(int(j))
                    vals.append(sign * float(Amat[r, jloc]))
        ed.add_block(rows, cols, vals, -sign * bvec, cone)

    if X.A_ub is not None:
        dense_block(X.A_ub, X.b_ub, "nonneg", -1.0)  # b - A x >= 0
    if X.A_eq is not None:
        dense_block(X.A_eq, X.b_eq, "zero", 1.0)
    if X.lb is not None:
        mask = np.isfinite(X.lb)
        if np.any(mask):
            idxs = np.flatnonzero(mask)
            ed.add_block(np.arange(len(idxs)), [int(x_idx[j]) for j in idxs],
                         np.ones(len(idxs)), -X.lb[idxs], "nonneg")
    if X.ub is not None:
        mask = np.isfinite(X.ub)
        if np.any(mask):
            idxs = np.flatnonzero(mask)
            ed.add_block(np.arange(len(idxs)), [int(x_idx[j]) for j in idxs],
                         -np.ones(len(idxs)), X.ub[idxs], "nonneg")


def _recover_atoms(res, stat_block, handles, cost, dus: UnivariateDus, tol=1e-6):
    """Worst-case atoms from the stationarity duals (complementary slackness)."""
    c_idx, x_idx, eta = handles
    N = dus.data.N
    zeta = res.duals[stat_block][: N]
    x = res.x[x_idx]
    eta_val = 0.0
    if eta is not None:
        eta_val = float(res.x[eta[0]] - res.x[eta[1]])
    edges = dus.interval_edges()
    phi_tag = _phi_tag(dus)
    phi = resolve_phi(phi_tag) if phi_tag is not None else (lambda v: np.zeros_like(v))
    chain = np.concatenate([[0.0], zeta, [1.0]])
    masses = np.diff(chain)
    scale = 1.0 + float(np.max(np.abs(edges[np.isfinite(edges)])))
    atoms = []
    for i in range(N + 1):
        p = float(masses[i])
        if p <= 1e-12:
            continue
        cands = [e for e in (edges[i], edges[i + 1]) if np.isfinite(e)]
        if phi_tag == "abs" and edges[i] < 0 < edges[i + 1]:
            cands.append(0.0)
        vals = [float(cost.evaluate(x, [c])[0]) - eta_val * float(phi(np.array([c]))[0])
                for c in cands]
        pt = cands[int(np.argmax(vals))]
        if i >= 1 and pt == edges[i]:
            # the interval is open at its left end (a data point); the sup is
            # a limit there, so report a point just inside
            nudged = pt + 1e-10 * scale
            if np.isfinite(edges[i + 1]):
                nudged = min(nudged, 0.5 * (edges[i] + edges[i + 1]))
            pt = nudged
        atoms.append((pt, p))
    arr = np.array(atoms)
    # diagnostics: mass, statistic feasibility, value match
    ok = abs(arr[:, 1].sum() - 1.0) <= 1e-8 and np.all(arr[:, 1] >= -1e-10)
    if ok:
        zeta_chk = np.clip(zeta, 0.0, 1.0)
        u = np.maximum.accumulate(zeta_chk)
        try:
            stat = edf_statistic(dus.kind, np.clip(u, 1e-12, 1 - 1e-12) if dus.kind == "ad" else u)
            ok = stat <= dus.q_edf.value + tol
        except Exception:
            ok = False
    if ok:
        expect = float(arr[:, 1] @ cost.evaluate(x, arr[:, 0]))
        ok = abs(expect - res.value) <= max(tol, tol * abs(res.value)) * 10
    return arr if ok else None


def _atoms_by_primal(res, handles, cost, dus: UnivariateDus):
    """Fallback: re-solve the inner problem over candidate atoms at fixed x."""
    from .cones import solve as _solve

    c_idx, x_idx, eta = handles
    x = res.x[x_idx]
    edges = dus.interval_edges()
    cands = sorted({float(e) for e in edges if np.isfinite(e)})
    if _phi_tag(dus) == "abs" and edges[0] < 0 < edges[-1]:
        cands = sorted(set(cands) | {0.0})
    cands = np.array(cands)
    vals = cost.evaluate(x, cands)
    N = dus.data.N
    v = dus.data.values
    m = len(cands)
    ed = ProgramEditor()
    q = ed.add_vars(m)
    ed.add_objective(q, vals)
    cone = edf_cone_data(dus.kind, N, dus.q_edf.value)
    aux = ed.add_vars(cone.n_aux) if cone.n_aux else np.array([], dtype=int)
    # zeta_i = sum of masses at candidates <= xi_(i)
    L = np.zeros((cone.n_vars, m))
    for i in range(N):
        L[i, cands <= v[i]] = 1.0
    for blk in cone.blocks:
        A = (blk.A @ sparse.csr_matrix(L)).tocoo()
        rows, cols, vals_ = list(A.row), list(A.col), list(A.data)
        if cone.n_aux:
            Aaux = blk.A.tocsc()[:, N:].tocoo()
            for r, cc, vv in zip(Aaux.row, Aaux.col, Aaux.data):
                rows.append(r)
                cols.append(int(aux[cc]))
                vals_.append(vv)
        ed.add_block(rows, cols, vals_, blk.b, blk.cone, blk.exp_arg_range)
    ed.add_block(np.arange(m), q, np.ones(m), np.zeros(m), "nonneg")
    ed.add_block(np.zeros(m, dtype=int), q, np.ones(m), [-1.0], "zero")
    if dus.moment is not None:
        pv = resolve_phi(dus.moment.phi)(cands)
        mu, qm = dus.moment.mu_hat, dus.moment.q_m.value
        ed.add_block(np.zeros(m, dtype=int), q, -pv, [mu + qm], "nonneg")
        ed.add_block(np.zeros(m, dtype=int), q, pv, [-(mu - qm)], "nonneg")
    sol = _solve(ed.program(sense="max"))
    if sol.status != "optimal":
        return None
    mass = sol.x[q]
    keep = mass > 1e-10
    return np.column_stack([cands[keep], mass[keep]])


def worst_case_value(x, cost, dus: UnivariateDus, tol: float = 1e-8):
    """(value, atoms) of the worst-case expected cost at a fixed decision.

    Unbounded configurations (unbounded support, unbounded cost, no moment
    leg) are reported with status 'unbounded' rather than a number.
    """
    try:
        prog, stat_block, handles = _build_single_level(cost, None, dus, fixed_x=x)
    except EmptyDus:
        return RobustSolution(x=np.atleast_1d(np.asarray(x, float)), value=None,
                              status="infeasible")
    if prog is None:
        return RobustSolution(x=np.atleast_1d(np.asarray(x, float)), value=None,
                              status="unbounded")
    res = solve(prog, tol)
    if res.status != "optimal":
        return RobustSolution(x=np.atleast_1d(np.asarray(x, float)), value=None,
                              status=res.status)
    atoms = _recover_atoms(res, stat_block, handles, cost, dus)
    if atoms is None:
        atoms = _atoms_by_primal(res, handles, cost, dus)
    return RobustSolution(
        x=np.atleast_1d(np.asarray(x, dtype=float)),
        value=res.value,
        status="optimal",
        atoms=atoms,
        gap=res.residuals.get("gap", float("nan")),
    )


def robust_minimize(cost, X: Polyhedron, dus: UnivariateDus, tol: float = 1e-8,
                    method: str = "auto") -> RobustSolution:
    """min over x in X of the worst-case expected cost over the DUS.

    `method='auto'` uses the closed form for compact-support KS newsvendor
    instances whose preconditions hold and the conic path otherwise.
    """
    if method not in ("auto", "conic", "closed-form"):
        raise ConfigurationError(f"unknown method {method!r}")
    if method in ("auto", "closed-form") and isinstance(cost, NewsvendorCost) \
            and dus.kind == "ks" and dus.moment is None:
        try:
            return ks_newsvendor_closed_form(dus.data, cost, dus.q_edf, dus.support)
        except ClosedFormInapplicable:
            if method == "closed-form":
                raise
    try:
        prog, stat_block, handles = _build_single_level(cost, X, dus, fixed_x=None)
    except EmptyDus:
        return RobustSolution(x=None, value=None, status="infeasible")
    if prog is None:
        return RobustSolution(x=None, value=None, status="unbounded")
    res = solve(prog, tol)
    if res.status != "optimal":
        return RobustSolution(x=None, value=None, status=res.status)
    _, x_idx, _ = handles
    atoms = _recover_atoms(res, stat_block, handles, cost, dus)
    if atoms is None:
        atoms = _atoms_by_primal(res, handles, cost, dus)
    return RobustSolution(
        x=res.x[x_idx],
        value=res.value,
        status="optimal",
        atoms=atoms,
        gap=res.residuals.get("gap", float("nan")),
    )


# ---------------------------------------------------------------------------
# closed-form KS newsvendor
# ---------------------------------------------------------------------------


def ks_newsvendor_closed_form(
    data: SampleSet, cost: NewsvendorCost, q: Threshold, support: SupportSpec
) -> RobustSolution:
    """Closed-form robust newsvendor under the KS confidence region.

    Requires compact support and Q < min(b, h) / (b + h); otherwise raises
    :class:`ClosedFormInapplicable` so callers fall back to the conic path.
    """
    if support.kind != "interval" or not support.is_compact:
        raise ClosedFormInapplicable("closed form needs a compact interval support")
    Q = q.value
    b, h = cost.b, cost.h
    theta = cost.theta
    if not Q < min(b, h) / (b + h):
        raise ClosedFormInapplicable("threshold too large: Q >= min(b,h)/(b+h)")
    v = data.values
    N = data.N
    if v[0] < support.lo or v[-1] > support.hi:
        raise DomainError("data outside the declared support")
    i_lo = int(math.ceil(N * (theta - Q)))
    i_hi = int(math.floor(N * (theta + Q) + 1.0))
    i_lo = max(i_lo, 1)
    i_hi = min(i_hi, N)
    xbar = (1.0 - theta) * v[i_lo - 1] + theta * v[i_hi - 1]
    cost_at = lambda xi: max(b * (xi - xbar), h * (xbar - xi))
    lo_corr = math.ceil(N * (theta - Q)) / N - (theta - Q)
    hi_corr = (theta + Q) - math.floor(N * (theta + Q)) / N
    z = (
        sum(cost_at(v[i - 1]) for i in range(1, i_lo + 1)) / N
        + sum(cost_at(v[i - 1]) for i in range(i_hi, N + 1)) / N
        + Q * cost_at(support.lo)
        + Q * cost_at(support.hi)
        - lo_corr * cost_at(v[i_lo - 1])
        - hi_corr * cost_at(v[i_hi - 1])
    )
    # worst-case atoms implied by the same complementarity pattern
    pts = [support.lo, support.hi]
    wts = [Q, Q]
    for i in range(1, N + 1):
        w = 1.0 / N
        if i == i_lo:
            w -= lo_corr
        if i == i_hi:
            w -= hi_corr
        if i < i_lo or i > i_hi:
            pass
        elif i_lo < i < i_hi:
            w = 0.0
        if w > 1e-15:
            pts.append(v[i - 1])
            wts.append(w)
    atoms = np.column_stack([pts, wts])
    return RobustSolution(
        x=np.array([xbar]), value=float(z), status="optimal", atoms=atoms, gap=0.0,
        meta={"i_lo": i_lo, "i_hi": i_hi, "method": "closed-form"},
    )

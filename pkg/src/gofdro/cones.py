"""Solver-agnostic conic program representation and transformations.

A :class:`ConeProgram` is a linear objective plus affine constraint blocks
``A x + b in K`` with K one of: free, zero, nonneg, second-order (soc), or
the exponential cone ``{(u, v, w) : v e^{u/v} <= w, v > 0}`` (closure).

`solve` dispatches pure-LP programs to HiGHS and anything with soc or exp
blocks to Clarabel, normalizing statuses and dual signs: the reported block
dual prices its offset, i.e. perturbing ``b`` by eps moves the optimal value
by ``dual . eps`` to first order.

`dualize_inner_max` mechanically dualizes a maximization (e.g. over
distribution weights) into an equivalent minimization, optionally leaving
the inner objective parameterized so the caller can splice in outer
variables. `exp_to_soc` rewrites exponential cones into second-order cones
by repeated squaring, with a certified bound on the exponent-argument error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, sparse

import clarabel

from ._validation import ConfigurationError

CONE_TAGS = ("free", "zero", "nonneg", "soc", "exp")


@dataclass(frozen=True)
class ConeBlock:
    """Affine block A x + b constrained to a cone."""

    A: sparse.csr_matrix
    b: np.ndarray
    cone: str
    exp_arg_range: Optional[float] = None  # declared |u/v| range, for exp_to_soc

    def __post_init__(self):
        A = sparse.csr_matrix(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.cone not in CONE_TAGS:
            raise ConfigurationError(f"unknown cone tag {self.cone!r}")
        if A.shape[0] != len(b):
            raise ConfigurationError("block offset length must match row count")
        if self.cone == "soc" and A.shape[0] < 2:
            raise ConfigurationError("soc blocks need dimension >= 2")
        if self.cone == "exp" and A.shape[0] != 3:
            raise ConfigurationError("exp blocks are three-dimensional")
        if not np.all(np.isfinite(b)):
            raise ConfigurationError("block offsets must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[0]


def block_from_coo(rows, cols, vals, b, n_vars, cone, **kw) -> ConeBlock:
    b = np.asarray(b, dtype=float).reshape(-1)
    A = sparse.coo_matrix(
        (np.asarray(vals, dtype=float), (np.asarray(rows), np.asarray(cols))),
        shape=(len(b), n_vars),
    ).tocsr()
    return ConeBlock(A=A, b=b, cone=cone, **kw)


@dataclass(frozen=True)
class ConeProgram:
    """min (or max) c' x + c0 subject to the constraint blocks."""

    n_vars: int
    c: np.ndarray
    blocks: Tuple[ConeBlock, ...]
    c0: float = 0.0
    sense: str = "min"

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if len(c) != self.n_vars:
            raise ConfigurationError("objective length must equal n_vars")
        if self.sense not in ("min", "max"):
            raise ConfigurationError("sense must be 'min' or 'max'")
        for blk in self.blocks:
            if blk.A.shape[1] != self.n_vars:
                raise ConfigurationError("block column count must equal n_vars")
        referenced = np.zeros(self.n_vars, dtype=bool)
        referenced |= c != 0
        for blk in self.blocks:
            cols = sparse.csc_matrix(blk.A).indptr
            referenced |= np.diff(cols) > 0
        if not np.all(referenced):
            missing = int(np.flatnonzero(~referenced)[0])
            raise ConfigurationError(f"variable {missing} appears in no block or objective")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "blocks", tuple(self.blocks))

    def to_json(self) -> str:
        """Debug dump for reproducing solver issues."""
        payload = {
            "n_vars": self.n_vars,
            "sense": self.sense,
            "c": self.c.tolist(),
            "c0": self.c0,
            "blocks": [
                {
                    "cone": blk.cone,
                    "b": blk.b.tolist(),
                    "A": {
                        "shape": list(blk.A.shape),
                        "rows": blk.A.tocoo().row.tolist(),
                        "cols": blk.A.tocoo().col.tolist(),
                        "vals": blk.A.tocoo().data.tolist(),
                    },
                }
                for blk in self.blocks
            ],
        }
        return json.dumps(payload)


@dataclass(frozen=True)
class SolveResult:
    status: str  # optimal | infeasible | unbounded | numerical-limit
    x: Optional[np.ndarray]
    duals: Optional[List[np.ndarray]]  # per block, pricing convention
    value: Optional[float]
    residuals: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------


def solve(program: ConeProgram, tol: float = 1e-8) -> SolveResult:
    """Solve the program, never reporting a spurious 'optimal'."""
    if program.sense == "max":
        flipped = replace(program, c=-program.c, c0=-program.c0, sense="min")
        res = solve(flipped, tol)
        return SolveResult(
            status=res.status,
            x=res.x,
            duals=None if res.duals is None else [-d for d in res.duals],
            value=None if res.value is None else -res.value,
            residuals=res.residuals,
        )
    if any(blk.cone in ("soc", "exp") for blk in program.blocks):
        return _solve_clarabel(program, tol)
    return _solve_highs(program, tol)


def _solve_highs(program: ConeProgram, tol: float) -> SolveResult:
    ub_A, ub_b, ub_idx = [], [], []
    eq_A, eq_b, eq_idx = [], [], []
    for i, blk in enumerate(program.blocks):
        if blk.cone == "nonneg":
            ub_A.append(-blk.A)
            ub_b.append(blk.b)
            ub_idx.append(i)
        elif blk.cone == "zero":
            eq_A.append(blk.A)
            eq_b.append(-blk.b)
            eq_idx.append(i)
    A_ub = sparse.vstack(ub_A).tocsr() if ub_A else None
    b_ub = np.concatenate(ub_b) if ub_b else None
    A_eq = sparse.vstack(eq_A).tocsr() if eq_A else None
    b_eq = np.concatenate(eq_b) if eq_b else None
    res = optimize.linprog(
        program.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
        bounds=(None, None), method="highs",
    )
    if res.status == 2:
        return SolveResult("infeasible", None, None, None)
    if res.status == 3:
        return SolveResult("unbounded", None, None, None)
    if res.status != 0:
        return SolveResult("numerical-limit", None, None, None,
                           {"message": res.message})
    x = np.asarray(res.x)
    duals = [np.zeros(blk.dim) for blk in program.blocks]
    if ub_idx:
        marg = np.asarray(res.ineqlin.marginals)
        off = 0
        for i in ub_idx:
            k = program.blocks[i].dim
            duals[i] = marg[off : off + k]
            off += k
    if eq_idx:
        marg = np.asarray(res.eqlin.marginals)
        off = 0
        for i in eq_idx:
            k = program.blocks[i].dim
            duals[i] = -marg[off : off + k]
            off += k
    value = float(res.fun) + program.c0
    resid = _residuals(program, x, value, duals)
    return SolveResult("optimal", x, duals, value, resid)


_CLARABEL_ORDER = {"zero": 0, "nonneg": 1, "soc": 2, "exp": 3}


def _solve_clarabel(program: ConeProgram, tol: float) -> SolveResult:
    order = [i for i, blk in enumerate(program.blocks) if blk.cone != "free"]
    order.sort(key=lambda i: _CLARABEL_ORDER[program.blocks[i].cone])
    mats, offs, cones = [], [], []
    for i in order:
        blk = program.blocks[i]
        mats.append(-blk.A)
        offs.append(blk.b)
        if blk.cone == "zero":
            cones.append(clarabel.ZeroConeT(blk.dim))
        elif blk.cone == "nonneg":
            cones.append(clarabel.NonnegativeConeT(blk.dim))
        elif blk.cone == "soc":
            cones.append(clarabel.SecondOrderConeT(blk.dim))
        else:
            cones.append(clarabel.ExponentialConeT())
    A = sparse.vstack(mats).tocsc() if mats else sparse.csc_matrix((0, program.n_vars))
    b = np.concatenate(offs) if offs else np.zeros(0)
    P = sparse.csc_matrix((program.n_vars, program.n_vars))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    solver = clarabel.DefaultSolver(P, program.c, A, b, cones, settings)
    sol = solver.solve()
    status = str(sol.status)
    if status in ("SolverStatus.PrimalInfeasible", "PrimalInfeasible"):
        return SolveResult("infeasible", None, None, None)
    if status in ("SolverStatus.DualInfeasible", "DualInfeasible"):
        return SolveResult("unbounded", None, None, None)
    if status not in ("SolverStatus.Solved", "Solved"):
        return SolveResult("numerical-limit", None, None, None, {"status": status})
    x = np.asarray(sol.x)
    z = np.asarray(sol.z)
    duals = [np.zeros(blk.dim) for blk in program.blocks]
    off = 0
    for i in order:
        k = program.blocks[i].dim
        duals[i] = -z[off : off + k]
        off += k
    value = float(sol.obj_val) + program.c0
    resid = _residuals(program, x, value, duals)
    return SolveResult("optimal", x, duals, value, resid)


def _cone_violation(s: np.ndarray, cone: str) -> float:
    if cone == "free":
        return 0.0
    if cone == "zero":
        return float(np.max(np.abs(s))) if len(s) else 0.0
    if cone == "nonneg":
        return float(max(np.max(-s), 0.0)) if len(s) else 0.0
    if cone == "soc":
        return float(max(np.linalg.norm(s[1:]) - s[0], 0.0))
    u, v, w = s
    if v > 1e-300:
        return float(max(v * math.exp(min(u / v, 700.0)) - w, 0.0))
    return float(max(-w, 0.0) + max(u, 0.0) + max(-v, 0.0))


def _residuals(program: ConeProgram, x, value, duals) -> dict:
    primal = 0.0
    for blk in program.blocks:
        primal = max(primal, _cone_violation(blk.A @ x + blk.b, blk.cone))
    dual_obj = program.c0 + sum(float(blk.b @ d) for blk, d in zip(program.blocks, duals))
    gap = abs(value - dual_obj) / (1.0 + abs(value))
    return {"primal": primal, "gap": gap}


# ---------------------------------------------------------------------------
# exponential-to-SOC rewriting
# ---------------------------------------------------------------------------


def exp_to_soc(program: ConeProgram, accuracy_bits: int) -> ConeProgram:
    """Replace exp blocks by chains of 3-d second-order cones.

    Uses the repeated-squaring outer approximation
    ``v e^{u/v} >= v (1 + (u/v)/2^m)^{2^m}`` with enough squarings m that the
    exponent-argument error is at most ``2^-accuracy_bits`` over each block's
    declared argument range. The rewritten feasible set contains the
    original one, and any point feasible for the rewrite satisfies the
    original constraint within that certified error.
    """
    if not any(blk.cone == "exp" for blk in program.blocks):
        return program
    if accuracy_bits < 1:
        raise ConfigurationError("accuracy_bits must be >= 1")
    n = program.n_vars
    extra_cols = 0
    offsets = {}
    for i, blk in enumerate(program.blocks):
        if blk.cone != "exp":
            continue
        if blk.exp_arg_range is None:
            raise ConfigurationError(
                "exp block lacks exp_arg_range metadata needed for the rewrite"
            )
        R = max(float(blk.exp_arg_range), 1.0)
        m = accuracy_bits + max(0, int(math.ceil(2.0 * math.log2(R))))
        offsets[i] = (m, n + extra_cols)
        extra_cols += m
    n_new = n + extra_cols

    def widen(A):
        A = sparse.csr_matrix(A)
        return sparse.hstack([A, sparse.csr_matrix((A.shape[0], n_new - A.shape[1]))]).tocsr()

    unit = lambda j: sparse.csr_matrix(
        (np.array([1.0]), (np.array([0]), np.array([j]))), shape=(1, n_new)
    )
    # each exp block is replaced in place by its two nonneg rows, keeping every
    # other block at its original index; the squaring chains go at the end
    new_blocks: List[ConeBlock] = []
    chains: List[ConeBlock] = []
    for i, blk in enumerate(program.blocks):
        if blk.cone != "exp":
            new_blocks.append(ConeBlock(widen(blk.A), blk.b, blk.cone))
            continue
        m, base = offsets[i]
        Au, Av, Aw = (widen(blk.A[k]) for k in range(3))
        bu, bv, bw = blk.b
        A_s0 = Av + Au / 2.0**m
        b_s0 = bv + bu / 2.0**m
        new_blocks.append(
            ConeBlock(sparse.vstack([A_s0, Aw - unit(base + m - 1)]).tocsr(),
                      np.array([b_s0, bw]), "nonneg")
        )
        prev_A, prev_b = A_s0, b_s0
        for j in range(m):
            yj = unit(base + j)
            A_soc = sparse.vstack([yj + Av, 2.0 * prev_A, yj - Av]).tocsr()
            b_soc = np.array([bv, 2.0 * prev_b, -bv])
            chains.append(ConeBlock(A_soc, b_soc, "soc"))
            prev_A, prev_b = yj, 0.0
    c_new = np.concatenate([program.c, np.zeros(extra_cols)])
    return ConeProgram(n_vars=n_new, c=c_new, blocks=tuple(new_blocks + chains),
                       c0=program.c0, sense=program.sense)


# ---------------------------------------------------------------------------
# mechanical dualization
# ---------------------------------------------------------------------------


class ProgramEditor:
    """Incremental ConeProgram assembly: add variables, COO rows, blocks."""

    def __init__(self, base: Optional[ConeProgram] = None):
        self.n = 0
        self.obj: List[Tuple[int, float]] = []
        self.c0 = 0.0
        self._blocks: List[Tuple[sparse.spmatrix, np.ndarray, str, Optional[float]]] = []
        if base is not None:
            self.n = base.n_vars
            self.c0 = base.c0
            self.obj = [(int(j), float(v)) for j, v in zip(np.flatnonzero(base.c), base.c[base.c != 0])]
            for blk in base.blocks:
                self._blocks.append((blk.A, blk.b, blk.cone, blk.exp_arg_range))

    def add_vars(self, k: int, obj=None) -> np.ndarray:
        idx = np.arange(self.n, self.n + k)
        self.n += k
        if obj is not None:
            obj = np.broadcast_to(np.asarray(obj, dtype=float), (k,))
            for j, v in zip(idx, obj):
                if v != 0.0:
                    self.obj.append((int(j), float(v)))
        return idx

    def add_objective(self, idx, coefs):
        coefs = np.broadcast_to(np.asarray(coefs, dtype=float), np.shape(idx))
        for j, v in zip(np.atleast_1d(idx), np.atleast_1d(coefs)):
            if v != 0.0:
                self.obj.append((int(j), float(v)))

    def add_block(self, rows, cols, vals, b, cone, exp_arg_range=None):
        b = np.asarray(b, dtype=float).reshape(-1)
        A = sparse.coo_matrix(
            (np.asarray(vals, dtype=float), (np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))),
            shape=(len(b), self.n),
        )
        self._blocks.append((A, b, cone, exp_arg_range))
        return len(self._blocks) - 1

    def absorb(self, prog: ConeProgram) -> Tuple[int, int]:
        """Append another program's variables, blocks, and objective.

        Returns (variable offset, block offset) for translating indices.
        """
        voff = self.n
        boff = len(self._blocks)
        self.n += prog.n_vars
        self.c0 += prog.c0
        for j in np.flatnonzero(prog.c):
            self.obj.append((int(j) + voff, float(prog.c[j])))
        for blk in prog.blocks:
            co = blk.A.tocoo()
            A = sparse.coo_matrix((co.data, (co.row, co.col + voff)),
                                  shape=(blk.dim, self.n))
            self._blocks.append((A, blk.b, blk.cone, blk.exp_arg_range))
        return voff, boff

    def program(self, sense="min") -> ConeProgram:
        c = np.zeros(self.n)
        for j, v in self.obj:
            c[j] += v
        blocks = []
        for A, b, cone, rng in self._blocks:
            A = sparse.csr_matrix(A)
            if A.shape[1] < self.n:
                A = sparse.hstack([A, sparse.csr_matrix((A.shape[0], self.n - A.shape[1]))]).tocsr()
            blocks.append(ConeBlock(A=A, b=b, cone=cone, exp_arg_range=rng))
        return ConeProgram(n_vars=self.n, c=c, c0=self.c0, sense=sense, blocks=tuple(blocks))


@dataclass(frozen=True)
class DualLayout:
    """Where each inner block's multiplier lives in the dual program."""

    lambda_slices: Tuple[Optional[Tuple[int, int]], ...]
    theta_slice: Optional[Tuple[int, int]]
    stationarity_block: int
    n_vars: int


def _strictly_feasible(program: ConeProgram, point, margin=1e-12) -> bool:
    """Relaxed Slater check: feasibility, strict only in nonpolyhedral cones."""
    x = np.asarray(point, dtype=float)
    for blk in program.blocks:
        s = blk.A @ x + blk.b
        if blk.cone == "free":
            continue
        if blk.cone == "zero":
            if np.max(np.abs(s), initial=0.0) > 1e-9:
                return False
        elif blk.cone == "nonneg":
            if np.min(s, initial=np.inf) < -1e-9:
                return False
        elif blk.cone == "soc":
            if s[0] - np.linalg.norm(s[1:]) <= margin:
                return False
        else:  # exp
            u, v, w = s
            if v <= margin or w - v * math.exp(u / v) <= margin:
                return False
    return True


def dualize_inner_max(
    inner: ConeProgram,
    slater_point,
    objective_param: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tuple[ConeProgram, DualLayout]:
    """Dual (minimization) of a maximization over a cone-represented set.

    Parameters
    ----------
    inner : ConeProgram with sense 'max'
        Objective ``c' x + c0`` subject to blocks ``A_i x + b_i in K_i``.
    slater_point : array
        A strictly feasible point certifying strong duality (for the
        distribution problems this is the empirical distribution).
    objective_param : optional (M, e)
        Leaves the inner objective parameterized as ``(c + M theta)' x +
        c0 + e' theta``; theta becomes extra free variables of the dual for
        the caller to constrain.

    Returns
    -------
    (dual, layout)
        dual: min over multipliers (and theta) of ``sum_i b_i' lambda_i +
        c0 (+ e' theta)`` subject to stationarity
        ``sum_i A_i' lambda_i + c (+ M theta) = 0`` and dual-cone membership.
        The dual of the exponential cone is expressed through the primal
        exponential cone via the linear map (u, v, w) -> (u - v, -u, w).
    """
    if inner.sense != "max":
        raise ConfigurationError("dualize_inner_max expects a maximization")
    if slater_point is None or not _strictly_feasible(inner, slater_point):
        raise ConfigurationError(
            "a strictly feasible point is required for strong duality"
        )
    n = inner.n_vars
    offsets: List[Optional[Tuple[int, int]]] = []
    pos = 0
    for blk in inner.blocks:
        if blk.cone == "free":
            offsets.append(None)
            continue
        offsets.append((pos, pos + blk.dim))
        pos += blk.dim
    n_lam = pos
    theta_dim = 0
    M = e = None
    if objective_param is not None:
        M, e = objective_param
        M = np.asarray(M, dtype=float)
        e = np.asarray(e, dtype=float).reshape(-1)
        if M.shape[0] != n or M.shape[1] != len(e):
            raise ConfigurationError("objective_param dims must be (n_vars x k), (k,)")
        theta_dim = M.shape[1]
    n_dual = n_lam + theta_dim

    # stationarity: sum_i A_i' lambda_i + c (+ M theta) = 0
    cols = []
    for blk, off in zip(inner.blocks, offsets):
        if off is None:
            continue
        cols.append(sparse.csr_matrix(blk.A).T)
    stat_A = sparse.hstack(cols).tocsr() if cols else sparse.csr_matrix((n, 0))
    if theta_dim:
        stat_A = sparse.hstack([stat_A, sparse.csr_matrix(M)]).tocsr()
    blocks: List[ConeBlock] = [ConeBlock(stat_A, inner.c.copy(), "zero")]
    stationarity_block = 0

    def selector(a, b_, rows=None):
        k = b_ - a
        data = np.ones(k)
        r = np.arange(k)
        A = sparse.coo_matrix((data, (r, np.arange(a, b_))), shape=(k, n_dual)).tocsr()
        return A

    for blk, off in zip(inner.blocks, offsets):
        if off is None:
            continue
        a, b_ = off
        if blk.cone == "zero":
            blocks.append(ConeBlock(selector(a, b_), np.zeros(b_ - a), "free"))
        elif blk.cone == "nonneg":
            blocks.append(ConeBlock(selector(a, b_), np.zeros(b_ - a), "nonneg"))
        elif blk.cone == "soc":
            blocks.append(ConeBlock(selector(a, b_), np.zeros(b_ - a), "soc"))
        else:  # exp: lambda in Kexp* iff (lu - lv, -lu, lw) in Kexp
            T = sparse.csr_matrix(np.array([[1.0, -1.0, 0.0],
                                            [-1.0, 0.0, 0.0],
                                            [0.0, 0.0, 1.0]]))
            blocks.append(ConeBlock((T @ selector(a, b_)).tocsr(), np.zeros(3), "exp"))

    c_dual = np.zeros(n_dual)
    for blk, off in zip(inner.blocks, offsets):
        if off is None:
            continue
        c_dual[off[0] : off[1]] = blk.b
    if theta_dim:
        c_dual[n_lam:] = e
    dual = ConeProgram(n_vars=n_dual, c=c_dual, blocks=tuple(blocks),
                       c0=inner.c0, sense="min")
    layout = DualLayout(
        lambda_slices=tuple(offsets),
        theta_slice=(n_lam, n_dual) if theta_dim else None,
        stationarity_block=stationarity_block,
        n_vars=n_dual,
    )
    return dual, layout

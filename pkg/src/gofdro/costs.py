"""Cost-function descriptions c(x; xi) and the decision polyhedron.

Every model knows how to evaluate itself on a batch of scenarios and where
its kinks in xi are (for the quadrature oracle). Conic reformulation rows
for each model live next to the reformulation builders, not here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from ._validation import ConfigurationError, check_positive


@dataclass(frozen=True)
class Polyhedron:
    """Decision set {x : A_ub x <= b_ub, A_eq x = b_eq, lb <= x <= ub}."""

    dim: int
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    @staticmethod
    def nonneg(dim=1) -> "Polyhedron":
        return Polyhedron(dim=dim, lb=np.zeros(dim))

    @staticmethod
    def box(lo, hi) -> "Polyhedron":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        return Polyhedron(dim=len(lo), lb=lo, ub=hi)

    @staticmethod
    def simplex(dim) -> "Polyhedron":
        return Polyhedron(
            dim=dim,
            A_eq=np.ones((1, dim)),
            b_eq=np.ones(1),
            lb=np.zeros(dim),
        )

    @staticmethod
    def capacity(dim, kappa) -> "Polyhedron":
        """x >= 0, sum(x) <= kappa."""
        return Polyhedron(
            dim=dim,
            A_ub=np.ones((1, dim)),
            b_ub=np.array([float(kappa)]),
            lb=np.zeros(dim),
        )

    def with_free_prefix(self, k: int) -> "Polyhedron":
        """Same constraints on the last `dim` coordinates, k free ones prepended."""
        pad = lambda M: None if M is None else np.hstack([np.zeros((M.shape[0], k)), M])
        lb = None if self.lb is None else np.concatenate([np.full(k, -np.inf), self.lb])
        ub = None if self.ub is None else np.concatenate([np.full(k, np.inf), self.ub])
        return Polyhedron(
            dim=self.dim + k,
            A_ub=pad(self.A_ub), b_ub=self.b_ub,
            A_eq=pad(self.A_eq), b_eq=self.b_eq,
            lb=lb, ub=ub,
        )


# ---------------------------------------------------------------------------
# univariate-scenario models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NewsvendorCost:
    """max{b (xi - x), h (x - xi)} with backlog penalty b and holding penalty h."""

    b: float
    h: float

    def __post_init__(self):
        check_positive(self.b, "b")
        check_positive(self.h, "h")

    @property
    def theta(self) -> float:
        """Critical ratio b / (b + h)."""
        return self.b / (self.b + self.h)

    xi_dim = 1
    x_dim = 1

    def evaluate(self, x, xi):
        x = np.atleast_1d(np.asarray(x, dtype=float))[0]
        v = np.asarray(xi, dtype=float).reshape(-1)
        return np.maximum(self.b * (v - x), self.h * (x - v))

    def breakpoints(self, x):
        return [float(np.atleast_1d(x)[0])]


@dataclass(frozen=True)
class MaxBilinearCost:
    """max_k p_k0 + p_k1' x + p_k2 xi + xi * p_k3' x over univariate xi.

    pieces: sequence of (p0, p1, p2, p3) with p1, p3 of length x_dim.
    """

    pieces: Tuple[Tuple[float, Tuple[float, ...], float, Tuple[float, ...]], ...]

    def __post_init__(self):
        if len(self.pieces) < 1:
            raise ConfigurationError("MaxBilinearCost needs at least one piece")

    xi_dim = 1

    @property
    def x_dim(self) -> int:
        return len(self.pieces[0][1])

    def _slopes_intercepts(self, x):
        x = np.asarray(x, dtype=float)
        slopes, intercepts = [], []
        for p0, p1, p2, p3 in self.pieces:
            slopes.append(p2 + float(np.dot(p3, x)))
            intercepts.append(p0 + float(np.dot(p1, x)))
        return np.array(slopes), np.array(intercepts)

    def evaluate(self, x, xi):
        s, c = self._slopes_intercepts(x)
        v = np.asarray(xi, dtype=float).reshape(-1)
        return np.max(c[None, :] + v[:, None] * s[None, :], axis=1)

    def breakpoints(self, x):
        s, c = self._slopes_intercepts(x)
        pts = []
        for i in range(len(s)):
            for j in range(i + 1, len(s)):
                if abs(s[i] - s[j]) > 1e-14:
                    pts.append((c[j] - c[i]) / (s[i] - s[j]))
        return pts


@dataclass(frozen=True)
class TwoStageCost1D:
    """Two-stage cost with linear recourse and nonincreasing PWL disutility.

    The stage value is t(x; xi) = c' x + R(x; xi) with recourse value
    R(x; xi) = max_{y >= 0} (f + g xi)' y subject to A x + B y = b + p xi,
    and the reported cost is max_k (gamma_k t + beta_k) with gamma_k <= 0.
    Reading the recourse as a value maximization keeps every piece convex in
    x and makes interval suprema land where the reformulations expect them.

    Exactly one of g, p may be nonzero: `rhs-only` (g = 0) or `cost-only`
    (p = 0).
    """

    c: Tuple[float, ...]
    f: Tuple[float, ...]
    g: Tuple[float, ...]
    A: Tuple[Tuple[float, ...], ...]
    B: Tuple[Tuple[float, ...], ...]
    b: Tuple[float, ...]
    p: Tuple[float, ...]
    gammas: Tuple[float, ...]
    betas: Tuple[float, ...]

    def __post_init__(self):
        if any(gk > 0 for gk in self.gammas):
            raise ConfigurationError("disutility slopes gamma_k must be <= 0")
        g_zero = not np.any(np.asarray(self.g, dtype=float))
        p_zero = not np.any(np.asarray(self.p, dtype=float))
        if not (g_zero or p_zero):
            raise ConfigurationError("exactly one of g, p must be zero")

    xi_dim = 1

    @property
    def mode(self) -> str:
        return "rhs-only" if not np.any(np.asarray(self.g, dtype=float)) else "cost-only"

    @property
    def x_dim(self) -> int:
        return len(self.c)

    def recourse_value(self, x, xi: float) -> float:
        f = np.asarray(self.f, dtype=float) + np.asarray(self.g, dtype=float) * xi
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        rhs = np.asarray(self.b, dtype=float) + np.asarray(self.p, dtype=float) * xi - A @ np.asarray(x, dtype=float)
        res = optimize.linprog(-f, A_eq=B, b_eq=rhs, bounds=(0, None), method="highs")
        if res.status != 0:
            raise ConfigurationError(f"recourse LP not solvable (status {res.status})")
        return -res.fun

    def evaluate(self, x, xi):
        x = np.asarray(x, dtype=float)
        v = np.asarray(xi, dtype=float).reshape(-1)
        cx = float(np.dot(self.c, x))
        out = np.empty(len(v))
        for i, t in enumerate(v):
            stage = cx + self.recourse_value(x, float(t))
            out[i] = max(gk * stage + bk for gk, bk in zip(self.gammas, self.betas))
        return out

    def breakpoints(self, x):
        return []


@dataclass(frozen=True)
class ScenarioTwoStageCost:
    """Two-stage recourse cost over known scenarios (one recourse LP per atom)."""

    c: Tuple[float, ...]
    scenarios: Tuple[dict, ...]  # each: {"f":..., "A":..., "B":..., "b":...}
    gammas: Tuple[float, ...]
    betas: Tuple[float, ...]

    def __post_init__(self):
        if any(gk > 0 for gk in self.gammas):
            raise ConfigurationError("disutility slopes gamma_k must be <= 0")
        if len(self.scenarios) < 1:
            raise ConfigurationError("need at least one scenario")

    @property
    def n_scenarios(self) -> int:
        return len(self.scenarios)

    @property
    def x_dim(self) -> int:
        return len(self.c)

    def atom_cost(self, x, j: int) -> float:
        sc = self.scenarios[j]
        f = np.asarray(sc["f"], dtype=float)
        A = np.asarray(sc["A"], dtype=float)
        B = np.asarray(sc["B"], dtype=float)
        rhs = np.asarray(sc["b"], dtype=float) - A @ np.asarray(x, dtype=float)
        res = optimize.linprog(-f, A_eq=B, b_eq=rhs, bounds=(0, None), method="highs")
        if res.status != 0:
            raise ConfigurationError(f"scenario {j} recourse infeasible (status {res.status})")
        stage = float(np.dot(self.c, x)) - res.fun
        return max(gk * stage + bk for gk, bk in zip(self.gammas, self.betas))

    def atom_costs(self, x):
        return np.array([self.atom_cost(x, j) for j in range(self.n_scenarios)])


# ---------------------------------------------------------------------------
# multivariate models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CvarPortfolioCost:
    """CVaR-epsilon of negative portfolio returns in decision (beta, x).

    c((beta, x); xi) = max{beta, (1 - 1/eps) beta - xi' x / eps}; minimizing
    its expectation over (beta, x) minimizes the CVaR of -xi' x.
    """

    epsilon: float
    d: int

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigurationError("epsilon must lie in (0, 1)")

    @property
    def xi_dim(self) -> int:
        return self.d

    @property
    def x_dim(self) -> int:
        return self.d + 1  # (beta, x)

    def evaluate(self, x, xi):
        x = np.asarray(x, dtype=float)
        beta, w = x[0], x[1:]
        pts = np.asarray(xi, dtype=float).reshape(-1, self.d)
        return np.maximum(beta, (1.0 - 1.0 / self.epsilon) * beta - pts @ w / self.epsilon)

    def bilinear_pieces(self) -> "BilinearPieces":
        """The two bilinear pieces of the hinge form, in decision (beta, x)."""
        d, eps = self.d, self.epsilon
        P1 = np.zeros((d + 1, d))
        P2 = np.zeros((d + 1, d))
        P2[1:, :] = -np.eye(d) / eps
        e_beta = np.zeros(d + 1)
        e_beta[0] = 1.0
        pieces = (
            (0.0, tuple(e_beta), tuple(np.zeros(d)), tuple(map(tuple, P1))),
            (0.0, tuple((1.0 - 1.0 / eps) * e_beta), tuple(np.zeros(d)), tuple(map(tuple, P2))),
        )
        return BilinearPieces(pieces=pieces, d=d)


@dataclass(frozen=True)
class BilinearPieces:
    """max_k p_k0 + p_k1' x + p_k2' xi + x' P_k xi over xi in R^d or {B xi >= b}."""

    pieces: Tuple[Tuple[float, Tuple[float, ...], Tuple[float, ...], Tuple[Tuple[float, ...], ...]], ...]
    d: int
    B: Optional[Tuple[Tuple[float, ...], ...]] = None
    b: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if len(self.pieces) < 1:
            raise ConfigurationError("need at least one piece")

    @property
    def K(self) -> int:
        return len(self.pieces)

    @property
    def xi_dim(self) -> int:
        return self.d

    @property
    def x_dim(self) -> int:
        return len(self.pieces[0][1])

    def piece_arrays(self, k):
        p0, p1, p2, P = self.pieces[k]
        return (
            float(p0),
            np.asarray(p1, dtype=float),
            np.asarray(p2, dtype=float),
            np.asarray(P, dtype=float),
        )

    def evaluate(self, x, xi):
        x = np.asarray(x, dtype=float)
        pts = np.asarray(xi, dtype=float).reshape(-1, self.d)
        vals = []
        for k in range(self.K):
            p0, p1, p2, P = self.piece_arrays(k)
            vals.append(p0 + float(p1 @ x) + pts @ (p2 + P.T @ x))
        return np.max(np.column_stack(vals), axis=1)


@dataclass(frozen=True)
class SeparableCost:
    """Sum over coordinates of univariate costs c_i(x_{j_i}; xi_i).

    coord_costs: one univariate cost model per xi coordinate.
    decision_index: which component of x each coordinate cost reads.
    """

    coord_costs: Tuple[object, ...]
    decision_index: Tuple[int, ...]

    def __post_init__(self):
        if len(self.coord_costs) != len(self.decision_index):
            raise ConfigurationError("one decision index per coordinate cost")

    @property
    def d(self) -> int:
        return len(self.coord_costs)

    def evaluate(self, x, xi):
        x = np.asarray(x, dtype=float)
        pts = np.asarray(xi, dtype=float).reshape(-1, self.d)
        total = np.zeros(len(pts))
        for i, (ci, ji) in enumerate(zip(self.coord_costs, self.decision_index)):
            total += ci.evaluate([x[ji]], pts[:, i])
        return total


# ---------------------------------------------------------------------------
# JSON round-trips
# ---------------------------------------------------------------------------

_COST_TYPES = {
    "newsvendor": NewsvendorCost,
    "max-bilinear": MaxBilinearCost,
    "two-stage-1d": TwoStageCost1D,
    "scenario-two-stage": ScenarioTwoStageCost,
    "cvar-portfolio": CvarPortfolioCost,
    "bilinear-pieces": BilinearPieces,
}


def cost_to_json(cost) -> str:
    for name, cls in _COST_TYPES.items():
        if isinstance(cost, cls):
            payload = {k: getattr(cost, k) for k in cls.__dataclass_fields__}
            return json.dumps({"kind": name, "params": payload}, default=_jsonable)
    raise ConfigurationError(f"cannot serialize cost of type {type(cost).__name__}")


def cost_from_json(text) -> object:
    obj = json.loads(text)
    cls = _COST_TYPES.get(obj.get("kind"))
    if cls is None:
        raise ConfigurationError(f"unknown cost kind {obj.get('kind')!r}")
    params = {k: _tupled(v) for k, v in obj["params"].items()}
    return cls(**params)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, tuple):
        return list(v)
    raise TypeError(f"not JSON-serializable: {type(v)}")


def _tupled(v):
    if isinstance(v, list):
        return tuple(_tupled(x) for x in v)
    return v

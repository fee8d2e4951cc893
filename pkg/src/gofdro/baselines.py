"""Comparison baselines: empirical optimization, its two-sample bound, and
moment-ball robust optimization with bootstrapped radii.

The moment baseline restricts to univariate costs and solves the worst case
by quadratic-majorant duality: minimize, over quadratics dominating the cost
on the support, the largest expectation the moment band allows. Its radii
shrink toward the known-moment ball as N grows, so its guarantee converges
to the known-moment bound, not to the full-information optimum.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ._validation import ConfigurationError, check_count, check_prob, rng_from
from .cones import ProgramEditor, solve
from .costs import (
    BilinearPieces,
    CvarPortfolioCost,
    MaxBilinearCost,
    NewsvendorCost,
    Polyhedron,
    SeparableCost,
    TwoStageCost1D,
)
from .gof import student_t_quantile
from .samples import SampleSet, SupportSpec
from .solution import RobustSolution
from .univariate import _Envelope, _polyhedron_rows, add_nonneg_quadratic


@dataclass(frozen=True)
class MomentDus:
    """Moment band: Mahalanobis mean ball (gamma1) and a spectral sandwich
    gamma3 Sigma <= second central moment <= gamma2 Sigma."""

    mu: np.ndarray
    sigma: np.ndarray
    gamma1: float
    gamma2: float
    gamma3: float

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sig = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if not np.allclose(sig, sig.T):
            raise ConfigurationError("sigma must be symmetric")
        if np.any(np.linalg.eigvalsh(sig) < -1e-10):
            raise ConfigurationError("sigma must be positive semidefinite")
        if self.gamma1 < 0 or not (self.gamma2 >= 1.0 >= self.gamma3 >= 0.0):
            raise ConfigurationError("radii must satisfy gamma1>=0, gamma2>=1>=gamma3>=0")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sig)

    @property
    def d(self) -> int:
        return len(self.mu)

    @staticmethod
    def exact(mu, sigma) -> "MomentDus":
        """Degenerate band pinning the moments exactly (known-moment bound)."""
        return MomentDus(mu=np.atleast_1d(mu), sigma=np.atleast_2d(sigma),
                         gamma1=0.0, gamma2=1.0, gamma3=1.0)


@dataclass(frozen=True)
class TwoSaaResult:
    x: np.ndarray
    bound: float
    n_train: int
    n_valid: int
    mu_valid: float
    sigma_valid: float


# ---------------------------------------------------------------------------
# empirical optimization
# ---------------------------------------------------------------------------


def _pointwise_epigraph(ed: ProgramEditor, cost, x_idx, points) -> np.ndarray:
    """c_i >= cost(x; xi_i) rows for every observation; returns c indices."""
    n = len(points)
    if isinstance(cost, SeparableCost):
        pts = points.reshape(-1, cost.d)
        out = []
        for coord, (ci, ji) in enumerate(zip(cost.coord_costs, cost.decision_index)):
            env = _Envelope(ed, ci, np.array([x_idx[ji]]), 0, None, None,
                            support_lo=float(pts[:, coord].min()))
            cc = ed.add_vars(n, obj=np.full(n, 1.0 / n))
            for i in range(n):
                env.c = int(cc[i])
                env.emit(float(pts[i, coord]), float(pts[i, coord]))
            env.flush()
            out.append(cc)
        return np.concatenate(out)
    c_idx = ed.add_vars(n, obj=np.full(n, 1.0 / n))
    if isinstance(cost, (NewsvendorCost, MaxBilinearCost, TwoStageCost1D)):
        env = _Envelope(ed, cost, x_idx, 0, None, None, support_lo=float(np.min(points)))
        for i, p in enumerate(points.reshape(-1)):
            env.c = int(c_idx[i])
            env.emit(float(p), float(p))
        env.flush()
        return c_idx
    if isinstance(cost, CvarPortfolioCost):
        d, eps = cost.d, cost.epsilon
        pts = points.reshape(-1, d)
        rows, cols, vals = [], [], []
        for i in range(n):
            rows.append(2 * i)
            cols.append(int(c_idx[i]))
            vals.append(1.0)
            rows.append(2 * i)
            cols.append(int(x_idx[0]))
            vals.append(-1.0)
            rows.append(2 * i + 1)
            cols.append(int(c_idx[i]))
            vals.append(1.0)
            rows.append(2 * i + 1)
            cols.append(int(x_idx[0]))
            vals.append(-(1.0 - 1.0 / eps))
            for j in range(d):
                if pts[i, j]:
                    rows.append(2 * i + 1)
                    cols.append(int(x_idx[1 + j]))
                    vals.append(pts[i, j] / eps)
        ed.add_block(rows, cols, vals, np.zeros(2 * n), "nonneg")
        return c_idx
    if isinstance(cost, BilinearPieces):
        pts = points.reshape(-1, cost.d)
        rows, cols, vals, offs = [], [], [], []
        rr = 0
        for i in range(n):
            for k in range(cost.K):
                p0, p1, p2, P = cost.piece_arrays(k)
                rows.append(rr)
                cols.append(int(c_idx[i]))
                vals.append(1.0)
                xc = p1 + P @ pts[i]
                for j in range(cost.x_dim):
                    if xc[j]:
                        rows.append(rr)
                        cols.append(int(x_idx[j]))
                        vals.append(-float(xc[j]))
                offs.append(-float(p0 + p2 @ pts[i]))
                rr += 1
        ed.add_block(rows, cols, vals, offs, "nonneg")
        return c_idx
    raise ConfigurationError(f"saa_solve does not support {type(cost).__name__}")


def saa_solve(data: SampleSet, cost, X: Polyhedron, tol: float = 1e-8) -> RobustSolution:
    """Minimize the empirical average cost with one LP."""
    ed = ProgramEditor()
    x_idx = ed.add_vars(X.dim)
    _polyhedron_rows(ed, X, x_idx)
    _pointwise_epigraph(ed, cost, x_idx, data.points)
    res = solve(ed.program(sense="min"), tol)
    if res.status != "optimal":
        return RobustSolution(x=None, value=None, status=res.status)
    return RobustSolution(x=res.x[x_idx], value=res.value, status="optimal",
                          gap=res.residuals.get("gap", float("nan")))


def two_sample_saa(data: SampleSet, cost, X: Polyhedron, alpha: float) -> TwoSaaResult:
    """Train on the first half (original draw order), bound on the second.

    The bound is the one-sided Student-T upper confidence limit
    mu_hat + sigma_hat t_{n-1}(1 - alpha) / sqrt(n) on the validation costs.
    """
    check_prob(alpha, "alpha")
    if data.N < 4:
        raise ConfigurationError("the two-sample split needs N >= 4")
    pts = data.original_points()
    n_train = math.ceil(data.N / 2)
    train = SampleSet.from_data(pts[:n_train])
    valid = pts[n_train:]
    fit = saa_solve(train, cost, X)
    if not fit.is_optimal:
        raise ConfigurationError(f"training solve failed: {fit.status}")
    costs = cost.evaluate(fit.x, valid)
    n_valid = len(costs)
    mu = float(np.mean(costs))
    sd = float(np.std(costs, ddof=1)) if n_valid > 1 else 0.0
    bound = mu
    if sd > 0:
        bound += sd * student_t_quantile(n_valid - 1, 1.0 - alpha) / math.sqrt(n_valid)
    return TwoSaaResult(x=fit.x, bound=bound, n_train=n_train, n_valid=n_valid,
                        mu_valid=mu, sigma_valid=sd)


# ---------------------------------------------------------------------------
# bootstrapped moment radii
# ---------------------------------------------------------------------------


def delage_ye_bootstrap_radii(data: SampleSet, alpha: float, B: int, seed: int = 0) -> MomentDus:
    """Bootstrap the moment-band radii at total significance alpha.

    The budget is split in half: gamma1 from the (1 - alpha/2) quantile of
    the Mahalanobis deviation of resampled means, and (gamma2, gamma3) from
    the two (alpha/4, 1 - alpha/4) tails of the extreme eigenvalues of the
    resampled second-central-moment matrices whitened by the sample one.
    """
    check_count(B, "B", minimum=200)
    check_prob(alpha, "alpha")
    X = data.points
    N, d = X.shape
    if N <= d:
        raise ConfigurationError("need more observations than dimensions")
    mu = X.mean(axis=0)
    sigma = (X - mu).T @ (X - mu) / N
    if np.allclose(sigma, 0.0):
        return MomentDus(mu=mu, sigma=np.eye(d) * 0.0, gamma1=0.0, gamma2=1.0, gamma3=1.0)
    eig = np.linalg.eigvalsh(sigma)
    if eig.min() <= 1e-12 * eig.max():
        warnings.warn("singular sample covariance; regularizing", stacklevel=2)
        sigma = sigma + 1e-8 * (np.trace(sigma) / d) * np.eye(d)
    rng = rng_from(seed)
    vals, lam_hi, lam_lo = np.empty(B), np.empty(B), np.empty(B)
    sig_inv = np.linalg.inv(sigma)
    w, V = np.linalg.eigh(sigma)
    whiten = V @ np.diag(w**-0.5) @ V.T
    for t in range(B):
        idx = rng.integers(0, N, size=N)
        Xt = X[idx]
        mu_t = Xt.mean(axis=0)
        dmu = mu_t - mu
        vals[t] = float(dmu @ sig_inv @ dmu)
        St = (Xt - mu).T @ (Xt - mu) / N
        lam = np.linalg.eigvalsh(whiten @ St @ whiten)
        lam_hi[t] = lam.max()
        lam_lo[t] = lam.min()
    gamma1 = float(np.quantile(vals, 1.0 - alpha / 2, method="inverted_cdf"))
    gamma2 = max(1.0, float(np.quantile(lam_hi, 1.0 - alpha / 4, method="inverted_cdf")))
    gamma3 = min(1.0, max(0.0, float(np.quantile(lam_lo, alpha / 4, method="inverted_cdf"))))
    return MomentDus(mu=mu, sigma=sigma, gamma1=gamma1, gamma2=gamma2, gamma3=gamma3)


# ---------------------------------------------------------------------------
# univariate moment-robust optimization
# ---------------------------------------------------------------------------


def moment_dro_univariate(
    cost,
    X: Polyhedron,
    dus: MomentDus,
    support: SupportSpec,
    tol: float = 1e-8,
) -> RobustSolution:
    """min over x of the worst expectation consistent with the moment band.

    Dual form: find a quadratic a xi^2 + beta xi + c0 dominating the cost on
    the support and minimize its worst-case expectation over the band; exact
    by moment-problem duality whenever the band has interior.
    """
    if dus.d != 1:
        raise ConfigurationError("the moment baseline is univariate")
    if not isinstance(cost, (NewsvendorCost, MaxBilinearCost)):
        raise ConfigurationError("moment baseline supports piecewise-linear costs")
    if support.kind != "interval":
        raise ConfigurationError("moment baseline needs an interval support")
    mu = float(dus.mu[0])
    var = float(dus.sigma[0, 0])
    r1 = math.sqrt(dus.gamma1 * var)
    v_lo, v_hi = dus.gamma3 * var, dus.gamma2 * var
    m_lo, m_hi = mu - r1, mu + r1

    ed = ProgramEditor()
    x_idx = ed.add_vars(cost.x_dim)
    _polyhedron_rows(ed, X, x_idx)
    a, beta, c0 = ed.add_vars(3)
    u, v = ed.add_vars(2, obj=1.0)
    ed.add_objective([c0, a], [1.0, -mu * mu])
    # u >= a V for V in {v_lo, v_hi}; v >= (2 a mu + beta) m for m in {m_lo, m_hi}
    ed.add_block([0, 0, 1, 1], [u, a, u, a], [1.0, -v_lo, 1.0, -v_hi],
                 [0.0, 0.0], "nonneg")
    for m_end in (m_lo, m_hi):
        ed.add_block([0, 0, 0], [v, a, beta], [1.0, -2 * mu * m_end, -m_end],
                     [0.0], "nonneg")
    # majorant rows per cost piece: a xi^2 + (beta - slope) xi + (c0 - intercept) >= 0
    if isinstance(cost, NewsvendorCost):
        pieces = [(cost.b, [(int(x_idx[0]), cost.b)], 0.0),
                  (-cost.h, [(int(x_idx[0]), -cost.h)], 0.0)]
    else:
        pieces = []
        for p0, p1, p2, p3 in cost.pieces:
            if np.any(np.asarray(p3) != 0):
                raise ConfigurationError("moment baseline needs x-free xi slopes")
            xc = [(int(x_idx[j]), -float(c)) for j, c in enumerate(p1) if c]
            pieces.append((float(p2), xc, -float(p0)))
    for slope, x_cols, intercept_off in pieces:
        quad = ([(int(a), 1.0)], 0.0)
        lin = ([(int(beta), 1.0)], -float(slope))
        const = ([(int(c0), 1.0)] + x_cols, float(intercept_off))
        add_nonneg_quadratic(ed, quad, lin, const, support.lo, support.hi)
    res = solve(ed.program(sense="min"), tol)
    if res.status != "optimal":
        return RobustSolution(x=None, value=None, status=res.status)
    return RobustSolution(x=res.x[x_idx], value=res.value, status="optimal",
                          gap=res.residuals.get("gap", float("nan")),
                          meta={"quadratic": (res.x[a], res.x[beta], res.x[c0])})


def scarf_bound(cost, mu: float, sigma: float, support: SupportSpec,
                X: Optional[Polyhedron] = None) -> RobustSolution:
    """Known-moment robust bound (exact mean and variance)."""
    dus = MomentDus.exact([mu], [[sigma**2]])
    return moment_dro_univariate(cost, X or Polyhedron.nonneg(1), dus, support)

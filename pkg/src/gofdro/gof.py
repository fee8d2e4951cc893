"""Goodness-of-fit statistics and threshold estimation.

Statistics
----------
* EDF distances between a hypothesized CDF and the empirical CDF evaluated
  at order statistics: KS (D), Kuiper (V), Cramer-von Mises (W), Watson (U),
  Anderson-Darling (A), all in their square-root normalizations.
* Discrete-support statistics: Pearson chi-square X and the G statistic,
  again as square roots.
* Generalized-moment deviation M, the signed sum-of-squares deviation R, and
  the hinge-gap statistic C that certifies a linear-convex-ordering
  relation.

Thresholds
----------
Monte Carlo over uniform order statistics (distribution-free, exact for
finite N), Monte Carlo under a multinomial null, asymptotic chi-square,
bootstrap resampling, and a closed-form VC-dimension bound for the
hinge-gap statistic.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats as sps

from ._validation import (
    ConfigurationError,
    DomainError,
    check_count,
    check_prob,
    rng_from,
)
from .samples import DiscretePMF, SampleSet

EDF_KINDS = ("ks", "kuiper", "cvm", "watson", "ad")
DISCRETE_KINDS = ("chi2", "gtest")


# ---------------------------------------------------------------------------
# threshold record
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Threshold:
    """A rejection threshold at significance alpha, with its provenance."""

    value: float
    alpha: float
    method: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.value < 0:
            raise ConfigurationError("threshold value must be nonnegative")

    @staticmethod
    def user(value, alpha=float("nan")) -> "Threshold":
        return Threshold(value=float(value), alpha=alpha, method="user")


def _upper_quantile(values, alpha):
    """Order-statistic (1 - alpha) quantile: the ceil((1-alpha) * n)-th smallest."""
    v = np.sort(np.asarray(values, dtype=float))
    k = int(math.ceil((1.0 - alpha) * len(v)))
    k = min(max(k, 1), len(v))
    return float(v[k - 1])


# ---------------------------------------------------------------------------
# EDF statistics
# ---------------------------------------------------------------------------


def edf_statistic(kind: str, u) -> float:
    """EDF statistic of the transformed sample u_i = F0(xi_(i)).

    `u` must be sorted nondecreasing with entries in [0, 1] (strictly inside
    (0, 1) for the Anderson-Darling statistic).
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or len(u) < 1:
        raise ConfigurationError("u must be a nonempty vector")
    if np.any(np.diff(u) < 0):
        raise DomainError("u must be sorted nondecreasing")
    if np.any((u < 0) | (u > 1)):
        raise DomainError("u entries must lie in [0, 1]")
    if kind == "ad" and np.any((u <= 0) | (u >= 1)):
        raise DomainError("Anderson-Darling requires u strictly inside (0, 1)")
    return float(_edf_stat_batch(kind, u[None, :])[0])


def _edf_stat_batch(kind: str, U: np.ndarray) -> np.ndarray:
    """Vectorized statistic over a (reps, N) batch of sorted u-vectors."""
    if kind not in EDF_KINDS:
        raise ConfigurationError(f"unknown EDF statistic kind {kind!r}")
    reps, N = U.shape
    i = np.arange(1, N + 1)
    if kind == "ks":
        d_plus = np.max(i / N - U, axis=1)
        d_minus = np.max(U - (i - 1) / N, axis=1)
        return np.maximum(d_plus, d_minus)
    if kind == "kuiper":
        return np.max(U - (i - 1) / N, axis=1) + np.max(i / N - U, axis=1)
    mid = (2 * i - 1) / (2 * N)
    if kind == "cvm":
        return np.sqrt(1.0 / (12 * N**2) + np.sum((mid - U) ** 2, axis=1) / N)
    if kind == "watson":
        w2 = 1.0 / (12 * N**2) + np.sum((mid - U) ** 2, axis=1) / N
        shift = (np.mean(U, axis=1) - 0.5) ** 2
        return np.sqrt(np.maximum(w2 - shift, 0.0))
    # Anderson-Darling: A^2 = -1 - sum_i [(2i-1) log u_i + (2(N-i)+1) log(1-u_i)] / N^2
    w_lo = (2 * i - 1) / N**2
    w_hi = (2 * (N - i) + 1) / N**2
    a2 = -1.0 - np.sum(w_lo * np.log(U) + w_hi * np.log1p(-U), axis=1)
    return np.sqrt(np.maximum(a2, 0.0))


def minimal_edf_statistic(kind: str, N: int) -> float:
    """Smallest achievable statistic value over u in [0,1]^N (midpoint anchor)."""
    mids = (2 * np.arange(1, N + 1) - 1) / (2 * N)
    return float(_edf_stat_batch(kind, mids[None, :])[0])


# ---------------------------------------------------------------------------
# discrete statistics
# ---------------------------------------------------------------------------


def discrete_statistic(kind: str, p0: DiscretePMF, phat: DiscretePMF) -> float:
    """X (chi-square) or G statistic of hypothesis p0 given empirical phat."""
    if kind not in DISCRETE_KINDS:
        raise ConfigurationError(f"unknown discrete statistic kind {kind!r}")
    if p0.support.n_atoms != phat.support.n_atoms or not np.array_equal(
        p0.support.atoms, phat.support.atoms
    ):
        raise ConfigurationError("p0 and phat must share one support")
    q, p = p0.probs, phat.probs
    if kind == "chi2":
        if np.any((q == 0) & (p > 0)):
            return float("inf")
        mask = q > 0
        return float(np.sqrt(np.sum((q[mask] - p[mask]) ** 2 / q[mask])))
    if np.any((q == 0) & (p > 0)):
        return float("inf")
    mask = p > 0
    return float(np.sqrt(2.0 * np.sum(p[mask] * np.log(p[mask] / q[mask]))))


# ---------------------------------------------------------------------------
# moment statistics
# ---------------------------------------------------------------------------

_PHI_MAP = {
    "identity": lambda v: v,
    "abs": np.abs,
    "square": np.square,
}


def resolve_phi(phi) -> Callable[[np.ndarray], np.ndarray]:
    if callable(phi):
        return phi
    try:
        return _PHI_MAP[phi]
    except KeyError:
        raise ConfigurationError(f"unknown phi tag {phi!r}") from None


def moment_statistic(data: SampleSet, phi, mu0: float) -> float:
    """|mu0 - sample mean of phi(xi)| for univariate data."""
    if data.d != 1:
        raise ConfigurationError("moment_statistic requires univariate data")
    vals = resolve_phi(phi)(data.values)
    if not np.all(np.isfinite(vals)):
        raise DomainError("phi produced non-finite values")
    return float(abs(mu0 - np.mean(vals)))


def sos_statistic(data: SampleSet, mu0: float) -> float:
    """Signed deviation (1/N) sum ||xi||_2^2 - mu0."""
    return float(np.mean(np.sum(data.points**2, axis=1)) - mu0)


# ---------------------------------------------------------------------------
# hinge-gap (linear-convex ordering) statistic
# ---------------------------------------------------------------------------


def _hinge_gap(points, weights, cand):
    """g(a, b) = sum_p w_p max(a' x_p - b, 0) for a batch of candidates.

    cand: (C, d+1) array of stacked (a, b) rows. Chunked to bound memory.
    """
    C = cand.shape[0]
    out = np.empty(C)
    chunk = max(1, int(2_000_000 // max(len(points), 1)))
    for s in range(0, C, chunk):
        block = cand[s : s + chunk]
        arg = points @ block[:, :-1].T - block[:, -1][None, :]
        out[s : s + chunk] = weights @ np.maximum(arg, 0.0)
    return out


def _cross_polytope_vertices(dim):
    v = np.vstack([np.eye(dim), -np.eye(dim)])
    return v


def _hinge_gap_sup_1d(points, weights):
    """Exact maximum for d = 1 by enumerating boundary breakpoints.

    g is positively homogeneous, so the max over the l1 ball sits on the
    boundary, a union of four segments; on each, g is piecewise linear in
    one parameter with breakpoints where a x_p = b.
    """
    x = points[:, 0]
    # segments between consecutive vertices of the diamond in (a, b)
    verts = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 0.0)]
    cands = [np.array([0.0, 0.0])]
    for (a0, b0), (a1, b1) in zip(verts[:-1], verts[1:]):
        da, db = a1 - a0, b1 - b0
        # hinge flip at t where (a0 + t da) x - (b0 + t db) = 0
        denom = da * x - db
        num = b0 - a0 * x
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / denom
        t = t[np.isfinite(t)]
        t = t[(t > 0) & (t < 1)]
        ts = np.concatenate([[0.0, 1.0], t])
        seg = np.column_stack([a0 + ts * da, b0 + ts * db])
        cands.append(seg)
    cand = np.vstack(cands)
    vals = _hinge_gap(points, weights, cand)
    k = int(np.argmax(vals))
    return float(vals[k]), cand[k], 0.0


def _box_upper_bounds(points, w_pos, w_neg, lo, hi):
    """Interval-arithmetic bound on g over boxes [lo, hi] in (a, b) space.

    Per point, the hinge argument a' x - b is monotone in each coordinate,
    so its exact range over a box follows from the sign pattern of x; the
    only slack in the bound is decoupling the positive- and negative-weight
    sums.
    """
    X = points
    Xp = np.maximum(X, 0.0)
    Xn = np.minimum(X, 0.0)
    a_lo, a_hi = lo[:, :-1], hi[:, :-1]
    b_lo, b_hi = lo[:, -1:], hi[:, -1:]
    arg_hi = a_hi @ Xp.T + a_lo @ Xn.T - b_lo
    arg_lo = a_lo @ Xp.T + a_hi @ Xn.T - b_hi
    return np.maximum(arg_hi, 0.0) @ w_pos + np.maximum(arg_lo, 0.0) @ w_neg


def _hinge_gap_sup_bb(points, weights, delta, max_boxes=3_000_000):
    """Certified branch-and-bound for d = 2 over the boundary facets.

    The objective is positively homogeneous of degree one in (a, b), so its
    maximum over the l1 ball is attained on the boundary (or is 0 at the
    origin). Each of the 8 boundary facets is the affine image of the
    standard triangle {u, v >= 0, u + v <= 1}; per point the hinge argument
    is affine in (u, v), giving exact interval bounds over rectangles.

    Returns (value, argmax, gap) with gap <= delta unless the box budget is
    exhausted, in which case gap is the achieved certificate.
    """
    w_pos = np.maximum(weights, 0.0)
    w_neg = np.minimum(weights, 0.0)
    x1, x2 = points[:, 0], points[:, 1]
    best_val = 0.0  # the origin always achieves 0
    best_arg = np.zeros(3)
    worst_gap = 0.0

    for s1 in (-1.0, 1.0):
        for s2 in (-1.0, 1.0):
            for s3 in (-1.0, 1.0):
                # (a1, a2, b) = (s1 u, s2 v, s3 (1 - u - v))
                cu = s1 * x1 + s3
                cv = s2 * x2 + s3
                c0 = -s3 * np.ones_like(x1)
                cu_p, cu_n = np.maximum(cu, 0), np.minimum(cu, 0)
                cv_p, cv_n = np.maximum(cv, 0), np.minimum(cv, 0)

                def evaluate(lo, hi):
                    n_boxes = lo.shape[0]
                    vals = np.empty(n_boxes)
                    ubs = np.empty(n_boxes)
                    chunk = max(1, int(4_000_000 // max(len(weights), 1)))
                    for s in range(0, n_boxes, chunk):
                        L, H = lo[s : s + chunk], hi[s : s + chunk]
                        centers = 0.5 * (L + H)
                        reps = centers / np.maximum(centers.sum(axis=1), 1.0)[:, None]
                        args = reps[:, 0:1] * cu + reps[:, 1:2] * cv + c0
                        vals[s : s + chunk] = np.maximum(args, 0.0) @ weights
                        arg_hi = (H[:, 0:1] * cu_p + L[:, 0:1] * cu_n
                                  + H[:, 1:2] * cv_p + L[:, 1:2] * cv_n + c0)
                        arg_lo = (L[:, 0:1] * cu_p + H[:, 0:1] * cu_n
                                  + L[:, 1:2] * cv_p + H[:, 1:2] * cv_n + c0)
                        ubs[s : s + chunk] = (np.maximum(arg_hi, 0.0) @ w_pos
                                              + np.maximum(arg_lo, 0.0) @ w_neg)
                    return vals, ubs

                lo = np.zeros((1, 2))
                hi = np.ones((1, 2))
                processed = 0
                while lo.shape[0] > 0 and processed < max_boxes:
                    vals, ubs = evaluate(lo, hi)
                    k = int(np.argmax(vals))
                    if vals[k] > best_val:
                        best_val = float(vals[k])
                        centers = 0.5 * (lo[k] + hi[k])
                        rep = centers / max(centers.sum(), 1.0)
                        best_arg = np.array([s1 * rep[0], s2 * rep[1],
                                             s3 * (1 - rep.sum())])
                    keep = ubs > best_val + delta
                    keep &= lo.sum(axis=1) <= 1.0  # outside the triangle
                    lo, hi = lo[keep], hi[keep]
                    if lo.shape[0] == 0:
                        break
                    processed += lo.shape[0]
                    widest = np.argmax(hi - lo, axis=1)
                    rows = np.arange(lo.shape[0])
                    mid = 0.5 * (lo[rows, widest] + hi[rows, widest])
                    lo2, hi2 = lo.copy(), hi.copy()
                    lo2[rows, widest] = mid
                    hi2[rows, widest] = mid
                    lo = np.vstack([lo, lo2])
                    hi = np.vstack([hi2, hi])
                if lo.shape[0] > 0:
                    _, ubs = evaluate(lo, hi)
                    worst_gap = max(worst_gap, float(np.max(ubs)) - best_val)
    gap = delta if worst_gap <= 0 else max(worst_gap, delta)
    return best_val, best_arg, float(min(gap, delta) if worst_gap <= 0 else gap)


def _coordinate_refine(points, weights, starts, sweeps=2):
    """Exact coordinate-wise line searches inside the l1 ball (heuristic)."""
    pts_ext = np.hstack([points, -np.ones((len(points), 1))])
    best = starts.copy()
    for _ in range(sweeps):
        for k in range(best.shape[1]):
            rest = np.sum(np.abs(np.delete(best, k, axis=1)), axis=1)
            budget = np.maximum(1.0 - rest, 0.0)
            for s in range(best.shape[0]):
                coef = pts_ext[:, k]
                other = points @ best[s, :-1] - best[s, -1] - coef * best[s, k]
                with np.errstate(divide="ignore", invalid="ignore"):
                    t = -other / coef
                t = t[np.isfinite(t)]
                t = np.clip(t, -budget[s], budget[s])
                ts = np.unique(np.concatenate([[-budget[s], 0.0, budget[s]], t]))
                cand = np.tile(best[s], (len(ts), 1))
                cand[:, k] = ts
                vals = _hinge_gap(points, weights, cand)
                best[s] = cand[int(np.argmax(vals))]
    vals = _hinge_gap(points, weights, best)
    k = int(np.argmax(vals))
    return float(vals[k]), best[k]


def _hinge_gap_sup(points, weights, delta, rng=None):
    """sup over ||a||_1 + |b| <= 1 of sum_p w_p max(a' x_p - b, 0).

    Exact for d = 1; certified branch-and-bound within `delta` for d = 2;
    vertex + quasi-random + coordinate-refinement heuristic (a lower bound)
    for higher dimensions.
    """
    live = weights != 0.0
    if not np.all(live):
        points, weights = points[live], weights[live]
    if len(points) == 0:
        return 0.0, np.zeros(points.shape[1] + 1), 0.0
    d = points.shape[1]
    if d == 1:
        return _hinge_gap_sup_1d(points, weights)
    if d == 2:
        return _hinge_gap_sup_bb(points, weights, delta)
    rng = rng_from(0 if rng is None else rng)
    dim = d + 1
    n_samples = 4096
    raw = rng.standard_exponential((n_samples, dim)) * rng.choice([-1.0, 1.0], (n_samples, dim))
    boundary = raw / np.sum(np.abs(raw), axis=1, keepdims=True)
    cand = np.vstack([_cross_polytope_vertices(dim), boundary])
    vals = _hinge_gap(points, weights, cand)
    top = cand[np.argsort(vals)[-8:]]
    val, arg = _coordinate_refine(points, weights, top)
    return val, arg, np.inf


def lcx_statistic(data: SampleSet, f0: DiscretePMF, delta: float) -> float:
    """Hinge-gap statistic of a finitely supported hypothesis f0.

    sup over the cross-polytope ||a||_1 + |b| <= 1 of
    E_{f0}[max(a' xi - b, 0)] - (1/N) sum_i max(a' xi^i - b, 0),
    computed within additive `delta` (exactly for d <= 2).
    """
    if delta <= 0:
        raise ConfigurationError("delta must be positive")
    atoms = f0.atoms
    if atoms.shape[1] != data.d:
        raise ConfigurationError("hypothesis atoms must match the data dimension")
    points = np.vstack([atoms, data.points])
    weights = np.concatenate([f0.probs, -np.ones(data.N) / data.N])
    val, _, _ = _hinge_gap_sup(points, weights, delta)
    return float(val)


# ---------------------------------------------------------------------------
# Monte Carlo thresholds
# ---------------------------------------------------------------------------


def _uniform_order_stats(rng, reps, N):
    """Sorted uniforms via exponential spacings (no sort needed)."""
    gaps = rng.standard_exponential((reps, N + 1))
    s = np.cumsum(gaps, axis=1)
    return s[:, :-1] / s[:, -1:]


def mc_threshold_edf(kind: str, N: int, alpha: float, reps: int, seed: int = 0) -> Threshold:
    """Distribution-free (1 - alpha) quantile of the EDF statistic at sample size N.

    Simulates the statistic with the hypothesized CDF values replaced by
    uniform order statistics; exact for finite N up to Monte Carlo error.
    """
    check_count(reps, "reps", minimum=1000)
    check_count(N, "N")
    alpha = check_prob(alpha, "alpha", open_interval=False)
    rng = rng_from(seed)
    out = np.empty(reps)
    chunk = max(1, min(reps, int(4_000_000 // (N + 1))))
    done = 0
    while done < reps:
        take = min(chunk, reps - done)
        U = _uniform_order_stats(rng, take, N)
        out[done : done + take] = _edf_stat_batch(kind, U)
        done += take
    value = _upper_quantile(out, alpha)
    return Threshold(value, alpha, "monte-carlo",
                     {"kind": kind, "N": N, "reps": reps, "seed": seed})


def mc_threshold_edf_pair(kind: str, N: int, alpha: float, reps: int,
                          seed: int = 0):
    """Thresholds at sample sizes N and N+1 from common random numbers.

    Feeding both statistics the same exponential spacings makes their
    quantiles strongly positively correlated, so the difference
    Q_N - Q_{N+1} (the driver of the price-of-data approximation) is not
    dominated by simulation noise.
    """
    check_count(reps, "reps", minimum=1000)
    rng = rng_from(seed)
    out_n = np.empty(reps)
    out_n1 = np.empty(reps)
    chunk = max(1, min(reps, int(4_000_000 // (N + 2))))
    done = 0
    while done < reps:
        take = min(chunk, reps - done)
        gaps = rng.standard_exponential((take, N + 2))
        s = np.cumsum(gaps, axis=1)
        u_n1 = s[:, :-1] / s[:, -1:]
        s_n = s[:, :-2]
        u_n = s_n / s[:, -2:-1]
        out_n[done : done + take] = _edf_stat_batch(kind, u_n)
        out_n1[done : done + take] = _edf_stat_batch(kind, u_n1)
        done += take
    meta = {"kind": kind, "reps": reps, "seed": seed, "paired": True}
    return (
        Threshold(_upper_quantile(out_n, alpha), alpha, "monte-carlo",
                  {**meta, "N": N}),
        Threshold(_upper_quantile(out_n1, alpha), alpha, "monte-carlo",
                  {**meta, "N": N + 1}),
    )


def mc_threshold_discrete(
    kind: str, p0: DiscretePMF, N: int, alpha: float, reps: int, seed: int = 0
) -> Threshold:
    """(1 - alpha) quantile of the discrete statistic under multinomial(p0, N)."""
    check_count(reps, "reps", minimum=1000)
    rng = rng_from(seed)
    counts = rng.multinomial(N, p0.probs, size=reps)
    phat = counts / N
    q = p0.probs
    if kind == "chi2":
        mask = q > 0
        stat = np.sqrt(np.sum((q[mask] - phat[:, mask]) ** 2 / q[mask], axis=1))
    elif kind == "gtest":
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = phat * np.log(phat / q)
        terms = np.where(phat > 0, terms, 0.0)
        stat = np.sqrt(2.0 * np.sum(terms, axis=1))
    else:
        raise ConfigurationError(f"unknown discrete statistic kind {kind!r}")
    value = _upper_quantile(stat, alpha)
    return Threshold(value, alpha, "monte-carlo",
                     {"kind": kind, "N": N, "reps": reps, "seed": seed})


def asymptotic_threshold_discrete(n: int, N: int, alpha: float) -> Threshold:
    """sqrt(chi2 quantile with n-1 dof / N), the large-N threshold for X and G."""
    if n < 2:
        raise ConfigurationError("support size must be at least 2")
    q = chi2_quantile(n - 1, 1.0 - check_prob(alpha))
    return Threshold(math.sqrt(q / N), alpha, "asymptotic", {"n": n, "N": N})


def bootstrap_threshold(
    statistic_fn: Callable[[SampleSet], float],
    data: SampleSet,
    alpha: float,
    B: int,
    seed: int = 0,
) -> Threshold:
    """(1 - alpha) quantile of the statistic over B resamples with replacement."""
    check_count(B, "B", minimum=200)
    rng = rng_from(seed)
    idx = rng.integers(0, data.N, size=(B, data.N))
    vals = np.array([statistic_fn(SampleSet.from_data(data.points[idx[t]])) for t in range(B)])
    return Threshold(_upper_quantile(vals, alpha), alpha, "bootstrap",
                     {"B": B, "seed": seed})


def lcx_bootstrap_threshold(
    data: SampleSet, alpha: float, B: int, delta: float, seed: int = 0
) -> Threshold:
    """Bootstrap threshold for the hinge-gap statistic.

    For each resample, solves the hinge-gap supremum between the original
    sample and the resample to precision `delta`, then returns the
    ceil((1-alpha) B)-th order statistic plus the achieved precision.
    For d > 2 the inner supremum is heuristic (see `lcx_statistic`), which
    only makes the returned threshold smaller; the bootstrap itself is an
    approximation at the same level.
    """
    check_count(B, "B", minimum=200)
    if delta <= 0:
        raise ConfigurationError("delta must be positive")
    rng = rng_from(seed)
    qs = np.empty(B)
    achieved = delta
    for t in range(B):
        counts = rng.multinomial(data.N, np.full(data.N, 1.0 / data.N))
        weights = (1.0 - counts) / data.N
        val, _, gap = _hinge_gap_sup(data.points, weights, delta, rng=seed + 7919 * t)
        qs[t] = max(val, 0.0)
        if np.isfinite(gap):
            achieved = max(achieved, gap)
    k = min(max(int(math.ceil((1.0 - alpha) * B)), 1), B)
    value = float(np.sort(qs)[k - 1]) + achieved
    return Threshold(value, alpha, "bootstrap",
                     {"B": B, "delta": delta, "seed": seed, "achieved": achieved})


def lcx_vc_threshold(N: int, d: int, alpha1: float, qbar_r: float) -> Threshold:
    """Closed-form VC-dimension threshold for the hinge-gap statistic.

    Valid for any sample size N >= 2; typically loose for moderate N, which
    is why the bootstrap variant is preferred in experiments.
    """
    if N < 2:
        raise DomainError("the closed-form threshold requires N >= 2")
    alpha1 = check_prob(alpha1, "alpha1")
    if qbar_r < 0:
        raise ConfigurationError("qbar_r must be nonnegative")
    logN, log2N = math.log(N), math.log(2 * N)
    p = 0.5 * (math.sqrt(math.log(256.0) + 8.0 * logN + log2N**2) - log2N)
    if not 1.0 < p < 2.0:
        raise DomainError(f"optimized exponent p={p} escaped (1, 2)")
    value = (
        (1.0 + qbar_r)
        * (1.0 + p / (2.0 - p))
        * 2.0 ** (0.5 + 1.0 / p)
        / N ** (1.0 - 1.0 / p)
        * math.sqrt(d + 1 + (d + 1) * math.log(N / (d + 1)) + math.log(4.0 / alpha1))
    )
    return Threshold(value, alpha1, "closed-form-vc", {"N": N, "d": d, "p": p})


# ---------------------------------------------------------------------------
# reference quantiles
# ---------------------------------------------------------------------------


def student_t_quantile(dof: int, prob: float) -> float:
    """prob-quantile of Student's T with `dof` degrees of freedom."""
    if dof < 1:
        raise ConfigurationError("dof must be >= 1")
    prob = check_prob(prob, "prob")
    return float(sps.t.ppf(prob, dof))


def chi2_quantile(dof: int, prob: float) -> float:
    """prob-quantile of the chi-square distribution with `dof` degrees of freedom."""
    if dof < 1:
        raise ConfigurationError("dof must be >= 1")
    prob = check_prob(prob, "prob")
    return float(sps.chi2.ppf(prob, dof))


def student_t_moment_threshold(data: SampleSet, phi, alpha: float) -> Threshold:
    """Two-sided T-approximation sigma_hat * t_{N-1}(1 - alpha/2) / sqrt(N)."""
    vals = resolve_phi(phi)(data.values)
    sd = float(np.std(vals, ddof=1)) if data.N > 1 else 0.0
    q = student_t_quantile(data.N - 1, 1.0 - alpha / 2.0) if data.N > 1 else 0.0
    return Threshold(sd * q / math.sqrt(data.N), alpha, "asymptotic",
                     {"test": "student-t", "N": data.N})


# ---------------------------------------------------------------------------
# threshold cache
# ---------------------------------------------------------------------------

_CACHE_FIELDS = ("kind", "N", "alpha", "method", "reps", "seed", "value")


class ThresholdCache:
    """CSV-backed table of simulated thresholds keyed on their parameters."""

    def __init__(self, path):
        self.path = str(path)
        self._table = {}
        if os.path.exists(self.path):
            with open(self.path, newline="") as fh:
                for row in csv.DictReader(fh):
                    self._table[self._key(row)] = float(row["value"])

    @staticmethod
    def _key(row):
        return (
            row["kind"],
            int(row["N"]),
            f"{float(row['alpha']):.12g}",
            row["method"],
            int(row["reps"]),
            int(row["seed"]),
        )

    def get(self, kind, N, alpha, method, reps, seed):
        return self._table.get(self._key(dict(
            kind=kind, N=N, alpha=alpha, method=method, reps=reps, seed=seed)))

    def put(self, kind, N, alpha, method, reps, seed, value):
        row = dict(kind=kind, N=N, alpha=alpha, method=method, reps=reps, seed=seed)
        self._table[self._key(row)] = float(value)

    def save(self):
        with open(self.path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CACHE_FIELDS)
            for key, value in sorted(self._table.items()):
                writer.writerow(list(key) + [repr(value)])


def edf_threshold(
    kind: str, N: int, alpha: float, reps: int = 100_000, seed: int = 0,
    cache: Optional[ThresholdCache] = None,
) -> Threshold:
    """Monte Carlo EDF threshold with optional CSV caching."""
    if cache is not None:
        hit = cache.get(kind, N, alpha, "monte-carlo", reps, seed)
        if hit is not None:
            return Threshold(hit, alpha, "monte-carlo",
                             {"kind": kind, "N": N, "reps": reps, "seed": seed})
    thr = mc_threshold_edf(kind, N, alpha, reps, seed)
    if cache is not None:
        cache.put(kind, N, alpha, "monte-carlo", reps, seed, thr.value)
        cache.save()
    return thr

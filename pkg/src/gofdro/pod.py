"""Price-of-data estimators: the expected drop in the guaranteed bound from
one more observation, by resampling or by the closed-form KS-newsvendor
threshold-difference approximation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._validation import ConfigurationError, check_count, rng_from
from .costs import NewsvendorCost, Polyhedron
from .gof import Threshold
from .samples import SampleSet, SupportSpec
from .solution import RobustSolution

Q_ALPHA_ASYMPTOTIC = {0.05: 1.36, 0.1: 1.22, 0.2: 1.07}


@dataclass(frozen=True)
class PodEstimate:
    method: str  # "resample" | "ks-approx"
    value: float
    m: int
    meta: dict = field(default_factory=dict)


def pod_resample(
    data: SampleSet,
    solve_fn: Callable[[SampleSet], RobustSolution],
    m: int,
    seed: int = 0,
) -> PodEstimate:
    """Resampling estimate: z(data) minus the average guarantee after
    appending one of m sampled observations back to the data.

    `solve_fn` must rebuild its uncertainty set for the augmented sample
    (thresholds re-looked-up at N + 1). With m = N the average runs over
    every observation exactly once. Augmented solves that fail are dropped
    and counted in the estimate's metadata.
    """
    m = check_count(m, "m")
    if m > data.N:
        raise ConfigurationError("subsample size m cannot exceed N")
    base = solve_fn(data)
    if not base.is_optimal:
        raise ConfigurationError(f"base solve failed: {base.status}")
    if m == data.N:
        picks = np.arange(data.N)
    else:
        picks = rng_from(seed).choice(data.N, size=m, replace=False)
    vals = []
    dropped = 0
    for i in picks:
        res = solve_fn(data.extend(data.points[i]))
        if res.is_optimal:
            vals.append(res.value)
        else:
            dropped += 1
    if not vals:
        raise ConfigurationError("every augmented solve failed")
    value = base.value - float(np.mean(vals))
    return PodEstimate(method="resample", value=value, m=m,
                       meta={"dropped": dropped, "base": base.value})


def pod_ks_approx(
    data: SampleSet,
    cost: NewsvendorCost,
    q_n: Threshold,
    q_n1: Threshold,
    support: SupportSpec,
    alpha: Optional[float] = None,
    x=None,
) -> PodEstimate:
    """Threshold-difference approximation for the KS newsvendor.

    (Q_N - Q_{N+1}) (c(x; lo) + c(x; hi)) at the robust order quantity.
    Also reports the large-N variant q_alpha / (2 N^{3/2}) times the same
    endpoint costs for alpha in the tabulated set.

    By default the order quantity comes from the closed form, whose
    precondition failure propagates as the fallback signal; callers outside
    that regime pass the robust decision `x` explicitly.
    """
    from .univariate import ks_newsvendor_closed_form

    if x is None:
        sol = ks_newsvendor_closed_form(data, cost, q_n, support)
        x = sol.x
    x = np.atleast_1d(np.asarray(x, dtype=float))
    edge_cost = float(cost.evaluate(x, [support.lo])[0] + cost.evaluate(x, [support.hi])[0])
    value = (q_n.value - q_n1.value) * edge_cost
    meta = {"edge_cost": edge_cost, "x": float(x[0])}
    alpha = q_n.alpha if alpha is None else alpha
    q_alpha = Q_ALPHA_ASYMPTOTIC.get(round(float(alpha), 4))
    if q_alpha is not None:
        meta["asymptotic"] = q_alpha / (2.0 * data.N**1.5) * edge_cost
    return PodEstimate(method="ks-approx", value=value, m=data.N, meta=meta)

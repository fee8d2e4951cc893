"""Batch experiment engine behind the command-line interface.

Runs seeded replication studies, convergence sweeps, and price-of-data
estimates over a JSON-configured grid of methods, emitting tidy CSV rows.
Replicates draw their data from per-(size, index) substreams, so results do
not depend on execution order, and a rerun of any logged (seed, N,
replicate) triple reproduces its row exactly.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import __version__
from ._validation import ConfigurationError
from .baselines import delage_ye_bootstrap_radii, moment_dro_univariate, saa_solve, scarf_bound, two_sample_saa
from .costs import (
    CvarPortfolioCost,
    NewsvendorCost,
    Polyhedron,
    cost_from_json,
)
from .gof import EDF_KINDS, Threshold, ThresholdCache, lcx_bootstrap_threshold, mc_threshold_edf
from .multivariate import LcxDus, lcx_robust_minimize
from .pod import PodEstimate, pod_ks_approx, pod_resample
from .samples import (
    GeneratorSpec,
    SampleSet,
    SupportSpec,
    minimize_true_cost,
    newsvendor_true_optimum,
    sample,
    true_expected_cost,
)
from .solution import RESULT_FIELDS, RobustSolution, write_result_rows
from .univariate import UnivariateDus, robust_minimize

_KNOWN_METHODS = ("saa", "2saa", "dy-bootstrap", "scarf") + tuple(
    f"robust-saa-{k}" for k in EDF_KINDS
) + ("robust-saa-lcx",)


@dataclass
class ExperimentConfig:
    generator: GeneratorSpec
    cost: object
    support: SupportSpec
    methods: List[dict]
    n_list: List[int]
    replications: int
    seed: int
    output: Optional[str] = None
    timing: bool = False
    auto_replicates: bool = False
    threshold_cache: Optional[str] = None
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:12]

    @property
    def build_id(self) -> str:
        return f"gofdro-{__version__}"


def parse_config(obj: dict) -> ExperimentConfig:
    """Validate a config dictionary; raises ConfigurationError on any defect."""
    try:
        gen = GeneratorSpec(obj["generator"]["family"],
                            obj["generator"].get("params", {}),
                            int(obj["generator"].get("seed", 0)))
        cost = cost_from_json(json.dumps(obj["cost"]))
        lo, hi = obj.get("support", (-np.inf, np.inf))
        support = SupportSpec.interval(float(lo), float(hi))
        methods = list(obj["methods"])
        for m in methods:
            if m.get("name") not in _KNOWN_METHODS:
                raise ConfigurationError(f"unknown method {m.get('name')!r}")
        n_list = [int(n) for n in np.atleast_1d(obj.get("N", [100]))]
        if sorted(n_list) != n_list:
            raise ConfigurationError("N list must be increasing")
        reps = int(obj.get("replications", 1))
        if reps < 1:
            raise ConfigurationError("replications must be >= 1")
        seed = int(obj.get("seed", 0))
        for m in methods:
            for key in ("alpha", "alpha1", "alpha2"):
                if key in m and not 0.0 < float(m[key]) < 1.0:
                    raise ConfigurationError(f"{key} must lie in (0,1)")
        return ExperimentConfig(
            generator=gen, cost=cost, support=support, methods=methods,
            n_list=n_list, replications=reps, seed=seed,
            output=obj.get("output"), timing=bool(obj.get("timing", False)),
            auto_replicates=bool(obj.get("auto_replicates", False)),
            threshold_cache=obj.get("threshold_cache"), raw=obj,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid config: {exc}") from exc


def _replicate_seed(base: int, N: int, r: int) -> int:
    return int(np.random.SeedSequence((base, N, r)).generate_state(1)[0])


class _MethodRunner:
    """Per-method solver with thresholds prepared once per sample size."""

    def __init__(self, spec: dict, cfg: ExperimentConfig):
        self.spec = spec
        self.cfg = cfg
        self.name = spec["name"]
        self._thresholds = {}
        self._cache = ThresholdCache(cfg.threshold_cache) if cfg.threshold_cache else None

    def prepare(self, N: int):
        if self.name.startswith("robust-saa-") and self.name != "robust-saa-lcx":
            kind = self.name.split("-")[-1]
            alpha1 = float(self.spec.get("alpha1", self.spec.get("alpha", 0.2)))
            reps = int(self.spec.get("threshold_reps", 100_000))
            tseed = int(self.spec.get("threshold_seed", 0))
            if self._cache is not None:
                hit = self._cache.get(kind, N, alpha1, "monte-carlo", reps, tseed)
                if hit is not None:
                    self._thresholds[N] = Threshold(hit, alpha1, "monte-carlo")
                    return
            thr = mc_threshold_edf(kind, N, alpha1, reps, tseed)
            if self._cache is not None:
                self._cache.put(kind, N, alpha1, "monte-carlo", reps, tseed, thr.value)
                self._cache.save()
            self._thresholds[N] = thr

    def solve(self, data: SampleSet, rep_seed: int) -> RobustSolution:
        cfg, spec = self.cfg, self.spec
        name = self.name
        if name == "saa":
            X = _decision_set(cfg)
            return saa_solve(data, cfg.cost, X)
        if name == "2saa":
            res = two_sample_saa(data, cfg.cost, _decision_set(cfg),
                                 float(spec.get("alpha", 0.2)))
            return RobustSolution(x=res.x, value=res.bound, status="optimal")
        if name == "dy-bootstrap":
            dus = delage_ye_bootstrap_radii(data, float(spec.get("alpha", 0.2)),
                                            int(spec.get("B", 200)), rep_seed)
            return moment_dro_univariate(cfg.cost, _decision_set(cfg), dus, cfg.support)
        if name == "scarf":
            return scarf_bound(cfg.cost, float(spec["mu"]), float(spec["sigma"]),
                               cfg.support)
        if name == "robust-saa-lcx":
            q_c = lcx_bootstrap_threshold(
                data, float(spec.get("alpha", 0.2)), int(spec.get("B", 200)),
                float(spec.get("delta", 0.01)), rep_seed,
            )
            X = _decision_set(cfg)
            return lcx_robust_minimize(cfg.cost, X, LcxDus(data=data, q_c=q_c))
        kind = name.split("-")[-1]
        thr = self._thresholds[data.N]
        alpha1 = float(spec.get("alpha1", spec.get("alpha", 0.2)))
        phi = spec.get("phi")
        dus = UnivariateDus.from_sample(
            data, kind, alpha1, thr, cfg.support,
            phi=phi, alpha2=float(spec.get("alpha2", 0.05)),
        )
        return robust_minimize(cfg.cost, _decision_set(cfg), dus)


def _decision_set(cfg: ExperimentConfig) -> Polyhedron:
    if isinstance(cfg.cost, CvarPortfolioCost):
        return Polyhedron.simplex(cfg.cost.d).with_free_prefix(1)
    return Polyhedron.nonneg(cfg.cost.x_dim)


def _true_cost(cfg: ExperimentConfig, x) -> float:
    return float(true_expected_cost(cfg.generator, cfg.cost, x, mc_seed=1))


def _row(cfg, method, N, replicate, sol, z_true, wall):
    x = sol.x if sol.x is not None else None
    return {
        "build_id": cfg.build_id,
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "method": method,
        "N": N,
        "alpha": "",
        "replicate": replicate,
        "x_first": "" if x is None else repr(float(x[0])),
        "x_norm": "" if x is None else repr(float(np.linalg.norm(x))),
        "value": "" if sol.value is None else repr(float(sol.value)),
        "z_true": "" if z_true is None else repr(float(z_true)),
        "bound_valid": "" if (sol.value is None or z_true is None)
        else int(sol.value >= z_true - 1e-9),
        "status": sol.status,
        "gap": "" if not np.isfinite(sol.gap) else repr(float(sol.gap)),
        "wall_time": f"{wall:.3f}" if cfg.timing and wall is not None else "",
    }


def run_replication_study(cfg: ExperimentConfig):
    """One row per (method, N, replicate) plus per-method aggregate rows.

    Returns (rows, any_solver_limit); individual replicate failures are
    recorded in their row's status and never abort the study.
    """
    rows = []
    solver_limit = False
    runners = [_MethodRunner(m, cfg) for m in cfg.methods]
    for N in cfg.n_list:
        for runner in runners:
            runner.prepare(N)
        results = {runner.name: [] for runner in runners}
        for r in range(cfg.replications):
            rep_seed = _replicate_seed(cfg.seed, N, r)
            gen = GeneratorSpec(cfg.generator.family, cfg.generator.params, rep_seed)
            data = sample(gen, N)
            for runner in runners:
                t0 = time.perf_counter()
                try:
                    sol = runner.solve(data, rep_seed)
                except ConfigurationError as exc:
                    sol = RobustSolution(x=None, value=None, status="numerical-limit",
                                         meta={"error": str(exc)})
                wall = time.perf_counter() - t0
                z = _true_cost(cfg, sol.x) if sol.is_optimal else None
                if sol.status == "numerical-limit":
                    solver_limit = True
                rows.append(_row(cfg, runner.name, N, r, sol, z, wall))
                results[runner.name].append((sol, z))
        for runner in runners:
            rows.extend(_aggregate_rows(cfg, runner.name, N, results[runner.name]))
    return rows, solver_limit


def _aggregate_rows(cfg, method, N, pairs):
    vals = np.array([s.value for s, _ in pairs if s.value is not None])
    zs = np.array([z for s, z in pairs if s.value is not None and z is not None])
    xs = np.array([float(s.x[0]) for s, _ in pairs if s.x is not None])
    out = []

    def agg(tag, value):
        return {
            "build_id": cfg.build_id, "config_hash": cfg.config_hash,
            "seed": cfg.seed, "method": method, "N": N, "alpha": "",
            "replicate": tag, "x_first": "", "x_norm": "",
            "value": "" if value is None else repr(float(value)),
            "z_true": "", "bound_valid": "", "status": "", "gap": "",
            "wall_time": "",
        }

    if len(vals):
        out.append(agg("mean", float(np.mean(vals))))
        out.append(agg("p20", float(np.quantile(vals, 0.2))))
        out.append(agg("p80", float(np.quantile(vals, 0.8))))
    if len(zs):
        covered = np.mean([
            1.0 if (s.value is not None and z is not None and s.value >= z - 1e-9) else 0.0
            for s, z in pairs
        ])
        out.append(agg("coverage", float(covered)))
    if len(xs) > 1:
        out.append(agg("decision_var", float(np.var(xs, ddof=1))))
    return out


def run_convergence_sweep(cfg: ExperimentConfig):
    """Per-(method, N) medians of the guarantee and its gap to the optimum."""
    if cfg.generator.dim != 1:
        raise ConfigurationError("the sweep's quadrature oracle is univariate")
    if isinstance(cfg.cost, NewsvendorCost):
        _, z_stoch = newsvendor_true_optimum(cfg.generator, cfg.cost.b, cfg.cost.h)
    else:
        lo = cfg.support.lo if np.isfinite(cfg.support.lo) else 0.0
        hi = cfg.support.hi if np.isfinite(cfg.support.hi) else 1000.0
        _, z_stoch = minimize_true_cost(cfg.generator, cfg.cost, lo, hi)
    rows, solver_limit = run_replication_study(cfg)
    sweep_rows = []
    for N in cfg.n_list:
        for m in cfg.methods:
            vals = [
                float(r["value"]) for r in rows
                if r["method"] == m["name"] and r["N"] == N
                and isinstance(r["replicate"], int) and r["value"] != ""
            ]
            if not vals:
                continue
            med = float(np.median(vals))
            gap = float(np.median([abs(v - z_stoch) for v in vals]))
            row = {k: "" for k in RESULT_FIELDS}
            row.update({
                "build_id": cfg.build_id, "config_hash": cfg.config_hash,
                "seed": cfg.seed, "method": m["name"], "N": N,
                "replicate": "median", "value": repr(med),
                "z_true": repr(z_stoch), "status": "",
                "gap": repr(gap),
            })
            sweep_rows.append(row)
    return rows + sweep_rows, solver_limit


def run_pod_study(cfg: ExperimentConfig, method: str, m_sub: int):
    """Price-of-data estimates per replicate at each N."""
    if not isinstance(cfg.cost, NewsvendorCost):
        raise ConfigurationError("the shipped PoD study covers the newsvendor cost")
    rows = []
    for N in cfg.n_list:
        reps = int(max(100_000, cfg.raw.get("threshold_reps", 100_000)))
        q_n = mc_threshold_edf("ks", N, float(cfg.raw.get("alpha", 0.2)), reps, 0)
        q_n1 = mc_threshold_edf("ks", N + 1, float(cfg.raw.get("alpha", 0.2)), reps, 0)
        thresholds = {N: q_n, N + 1: q_n1}

        def solve_fn(data):
            dus = UnivariateDus.from_sample(data, "ks", q_n.alpha,
                                            thresholds[data.N], cfg.support)
            return robust_minimize(cfg.cost, Polyhedron.nonneg(1), dus)

        for r in range(cfg.replications):
            rep_seed = _replicate_seed(cfg.seed, N, r)
            gen = GeneratorSpec(cfg.generator.family, cfg.generator.params, rep_seed)
            data = sample(gen, N)
            if method == "resample":
                est = pod_resample(data, solve_fn, m=min(m_sub, N), seed=rep_seed)
            else:
                est = pod_ks_approx(data, cfg.cost, q_n, q_n1, cfg.support)
            row = {k: "" for k in RESULT_FIELDS}
            row.update({
                "build_id": cfg.build_id, "config_hash": cfg.config_hash,
                "seed": cfg.seed, "method": f"pod-{method}", "N": N,
                "replicate": r, "value": repr(est.value), "status": "optimal",
            })
            rows.append(row)
    return rows, False

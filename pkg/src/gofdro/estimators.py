"""Scikit-learn style estimators wrapping the robust and baseline solvers.

Each estimator consumes an (N,) or (N, d) array of observed scenarios in
`fit`, exposes the learned decision and its guaranteed worst-case expected
cost as fitted attributes, and evaluates per-scenario costs in `predict` so
the objects compose with cross-validation utilities and pipelines.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import ConfigurationError, as_data_matrix
from .baselines import delage_ye_bootstrap_radii, moment_dro_univariate, saa_solve, two_sample_saa
from .costs import CvarPortfolioCost, NewsvendorCost, Polyhedron
from .gof import Threshold, lcx_bootstrap_threshold, mc_threshold_edf
from .multivariate import LcxDus, lcx_robust_minimize
from .samples import SampleSet, SupportSpec
from .univariate import UnivariateDus, robust_minimize


class _FittedDecisionMixin:
    """Shared post-fit surface: decision_, guarantee_, status_."""

    def _check_fitted(self):
        if not hasattr(self, "decision_"):
            raise ConfigurationError("estimator is not fitted")

    def predict(self, X):
        """Per-scenario cost of the fitted decision."""
        self._check_fitted()
        pts = as_data_matrix(X)
        return self._cost_model().evaluate(self.decision_, pts)

    def score(self, X, y=None):
        """Negative mean cost on the given scenarios (larger is better)."""
        return -float(np.mean(self.predict(X)))


class RobustNewsvendor(BaseEstimator, _FittedDecisionMixin):
    """Order-quantity chooser with a distributionally robust guarantee.

    Builds the confidence region of the chosen EDF test around the observed
    demand sample and minimizes the worst-case expected newsvendor cost over
    it. With an unbounded support, attach a generalized-moment leg via `phi`
    (significances `alpha1` + `alpha2` then add up to the total level).

    Parameters
    ----------
    b, h : float
        Backlog and holding penalties.
    test : str
        One of 'ks', 'kuiper', 'cvm', 'watson', 'ad'.
    alpha1, alpha2 : float
        Significance split; alpha2 only matters when phi is not None.
    support : tuple
        (lo, hi) demand support; hi may be inf when phi is given.
    phi : str or None
        'identity', 'abs', 'square', or None for no moment leg.
    threshold : float or None
        Fixed test threshold; simulated when None.
    threshold_reps, threshold_seed : int
        Monte Carlo budget for the simulated threshold.

    Attributes
    ----------
    decision_ : ndarray of shape (1,)
    order_quantity_ : float
    guarantee_ : float
    status_ : str
    atoms_ : ndarray or None
        Worst-case demand distribution as (point, probability) rows.
    """

    def __init__(self, b=1.0, h=1.0, test="ks", alpha1=0.2, alpha2=0.05,
                 support=(0.0, 250.0), phi=None, threshold=None,
                 threshold_reps=100_000, threshold_seed=0, method="auto"):
        self.b = b
        self.h = h
        self.test = test
        self.alpha1 = alpha1
        self.alpha2 = alpha2
        self.support = support
        self.phi = phi
        self.threshold = threshold
        self.threshold_reps = threshold_reps
        self.threshold_seed = threshold_seed
        self.method = method

    def _cost_model(self):
        return NewsvendorCost(b=self.b, h=self.h)

    def fit(self, X, y=None):
        data = SampleSet.from_data(as_data_matrix(X)[:, 0])
        if self.threshold is not None:
            q = Threshold.user(self.threshold, self.alpha1)
        else:
            q = mc_threshold_edf(self.test, data.N, self.alpha1,
                                 self.threshold_reps, self.threshold_seed)
        dus = UnivariateDus.from_sample(
            data, self.test, self.alpha1, q,
            SupportSpec.interval(*self.support),
            phi=self.phi, alpha2=self.alpha2,
        )
        sol = robust_minimize(self._cost_model(), Polyhedron.nonneg(1), dus,
                              method=self.method)
        self.status_ = sol.status
        self.dus_ = dus
        self.atoms_ = sol.atoms
        if sol.is_optimal:
            self.decision_ = sol.x
            self.order_quantity_ = float(sol.x[0])
            self.guarantee_ = float(sol.value)
        else:
            self.decision_ = None
            self.order_quantity_ = float("nan")
            self.guarantee_ = float("nan")
        return self


class SaaNewsvendor(BaseEstimator, _FittedDecisionMixin):
    """Plain empirical-average newsvendor (no robustness, no guarantee)."""

    def __init__(self, b=1.0, h=1.0):
        self.b = b
        self.h = h

    def _cost_model(self):
        return NewsvendorCost(b=self.b, h=self.h)

    def fit(self, X, y=None):
        data = SampleSet.from_data(as_data_matrix(X)[:, 0])
        sol = saa_solve(data, self._cost_model(), Polyhedron.nonneg(1))
        self.status_ = sol.status
        self.decision_ = sol.x
        self.order_quantity_ = float(sol.x[0])
        self.estimate_ = float(sol.value)
        self.guarantee_ = float(sol.value)  # in-sample estimate, not a bound
        return self


class TwoSampleSaaNewsvendor(BaseEstimator, _FittedDecisionMixin):
    """Train on half the sample, bound out-of-sample cost on the other half."""

    def __init__(self, b=1.0, h=1.0, alpha=0.2):
        self.b = b
        self.h = h
        self.alpha = alpha

    def _cost_model(self):
        return NewsvendorCost(b=self.b, h=self.h)

    def fit(self, X, y=None):
        data = SampleSet.from_data(as_data_matrix(X)[:, 0])
        res = two_sample_saa(data, self._cost_model(), Polyhedron.nonneg(1), self.alpha)
        self.decision_ = res.x
        self.order_quantity_ = float(res.x[0])
        self.guarantee_ = float(res.bound)
        self.status_ = "optimal"
        self.split_ = (res.n_train, res.n_valid)
        return self


class MomentRobustNewsvendor(BaseEstimator, _FittedDecisionMixin):
    """Moment-band robust newsvendor with bootstrapped radii."""

    def __init__(self, b=1.0, h=1.0, alpha=0.2, B=200, seed=0,
                 support=(0.0, 250.0)):
        self.b = b
        self.h = h
        self.alpha = alpha
        self.B = B
        self.seed = seed
        self.support = support

    def _cost_model(self):
        return NewsvendorCost(b=self.b, h=self.h)

    def fit(self, X, y=None):
        data = SampleSet.from_data(as_data_matrix(X)[:, 0])
        dus = delage_ye_bootstrap_radii(data, self.alpha, self.B, self.seed)
        sol = moment_dro_univariate(self._cost_model(), Polyhedron.nonneg(1),
                                    dus, SupportSpec.interval(*self.support))
        self.status_ = sol.status
        self.radii_ = (dus.gamma1, dus.gamma2, dus.gamma3)
        self.decision_ = sol.x if sol.is_optimal else None
        self.order_quantity_ = float(sol.x[0]) if sol.is_optimal else float("nan")
        self.guarantee_ = float(sol.value) if sol.is_optimal else float("nan")
        return self


class RobustCvarPortfolio(BaseEstimator, _FittedDecisionMixin):
    """Worst-case CVaR portfolio over the hinge-gap confidence region.

    fit(X) takes an (N, d) matrix of observed returns; the fitted attributes
    are the portfolio weights, the value-at-risk offset, and the guaranteed
    CVaR bound. `threshold=0` (or `bootstrap=False` with threshold given)
    reproduces the empirical CVaR optimizer.
    """

    def __init__(self, epsilon=0.1, alpha=0.2, threshold=None, B=200,
                 delta=0.01, seed=0):
        self.epsilon = epsilon
        self.alpha = alpha
        self.threshold = threshold
        self.B = B
        self.delta = delta
        self.seed = seed

    def _cost_model(self):
        return CvarPortfolioCost(epsilon=self.epsilon, d=self.d_)

    def fit(self, X, y=None):
        pts = as_data_matrix(X)
        self.d_ = pts.shape[1]
        data = SampleSet.from_data(pts)
        if self.threshold is not None:
            q_c = Threshold.user(self.threshold, self.alpha)
        else:
            q_c = lcx_bootstrap_threshold(data, self.alpha, self.B, self.delta,
                                          self.seed)
        X_set = Polyhedron.simplex(self.d_).with_free_prefix(1)
        sol = lcx_robust_minimize(self._cost_model(), X_set,
                                  LcxDus(data=data, q_c=q_c))
        self.status_ = sol.status
        self.threshold_ = q_c.value
        if sol.is_optimal:
            self.decision_ = sol.x
            self.var_offset_ = float(sol.x[0])
            self.weights_ = sol.x[1:]
            self.guarantee_ = float(sol.value)
        else:
            self.decision_ = None
            self.weights_ = None
            self.guarantee_ = float("nan")
        return self


class SaaCvarPortfolio(BaseEstimator, _FittedDecisionMixin):
    """Empirical CVaR portfolio optimizer."""

    def __init__(self, epsilon=0.1):
        self.epsilon = epsilon

    def _cost_model(self):
        return CvarPortfolioCost(epsilon=self.epsilon, d=self.d_)

    def fit(self, X, y=None):
        pts = as_data_matrix(X)
        self.d_ = pts.shape[1]
        data = SampleSet.from_data(pts)
        X_set = Polyhedron.simplex(self.d_).with_free_prefix(1)
        sol = saa_solve(data, self._cost_model(), X_set)
        self.status_ = sol.status
        self.decision_ = sol.x
        self.var_offset_ = float(sol.x[0])
        self.weights_ = sol.x[1:]
        self.estimate_ = float(sol.value)
        self.guarantee_ = float(sol.value)
        return self

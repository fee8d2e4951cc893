"""Distributionally robust optimization from goodness-of-fit confidence regions.

The package builds distributional uncertainty sets as the confidence regions
of goodness-of-fit tests, reformulates the induced worst-case-expectation
problems as single-level conic programs, and ships the comparison baselines
(plain and two-sample empirical optimization, moment-based robust
optimization) plus price-of-data estimators and an experiment CLI.
"""

from ._validation import ConfigurationError, DomainError
from .samples import (
    DiscretePMF,
    GeneratorSpec,
    SampleSet,
    SupportSpec,
    empirical_pmf,
    sample,
    true_cdf,
    true_expected_cost,
    true_pdf,
    true_quantile,
)
from .costs import (
    BilinearPieces,
    CvarPortfolioCost,
    MaxBilinearCost,
    NewsvendorCost,
    Polyhedron,
    ScenarioTwoStageCost,
    SeparableCost,
    TwoStageCost1D,
)
from .gof import (
    Threshold,
    ThresholdCache,
    asymptotic_threshold_discrete,
    bootstrap_threshold,
    chi2_quantile,
    discrete_statistic,
    edf_statistic,
    edf_threshold,
    lcx_bootstrap_threshold,
    lcx_statistic,
    lcx_vc_threshold,
    mc_threshold_discrete,
    mc_threshold_edf,
    moment_statistic,
    sos_statistic,
    student_t_quantile,
)
from .cones import ConeBlock, ConeProgram, SolveResult, dualize_inner_max, exp_to_soc, solve
from .solution import RobustSolution
from .univariate import (
    MomentLeg,
    UnivariateDus,
    edf_cone_data,
    ks_newsvendor_closed_form,
    robust_minimize,
    worst_case_value,
)
from .discrete import DiscreteDus, discrete_robust_minimize, discrete_worst_case
from .multivariate import (
    LcxDus,
    MarginalDus,
    lcx_robust_minimize,
    lcx_value,
    marginal_robust_minimize,
)
from .baselines import (
    MomentDus,
    TwoSaaResult,
    delage_ye_bootstrap_radii,
    moment_dro_univariate,
    saa_solve,
    two_sample_saa,
)
from .pod import PodEstimate, pod_ks_approx, pod_resample

__version__ = "0.1.0"

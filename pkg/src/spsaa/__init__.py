"""Experiment laboratory for sample-average approximation in convex
stochastic programming, with a stochastic mirror descent baseline.

Core layers:

* :mod:`spsaa.geometry`       -- q-norm machinery and the anchored penalty
* :mod:`spsaa.distributions`  -- seeded scenario samplers with tail classes
* :mod:`spsaa.problems`       -- synthetic instances with known optima
* :mod:`spsaa.saa`            -- empirical objectives and replace-one batches
* :mod:`spsaa.solver`         -- certified deterministic minimization
* :mod:`spsaa.smd`            -- the mirror-descent baseline
* :mod:`spsaa.stability`      -- replace-one stability probe
* :mod:`spsaa.estimators`     -- scikit-learn style frontends
* :mod:`spsaa.harness`        -- Monte Carlo plans, rate fits, persistence
"""

from .distributions import (
    DistSpec,
    MomentParameters,
    RngStream,
    TailClass,
    exponential,
    gaussian,
    moment_parameters,
    pareto,
    sample,
    student_t,
    tail_class,
)
from .estimators import MirrorDescentEstimator, SampleAverageEstimator
from .geometry import (
    GeometryConfig,
    dual_exponent,
    one_norm_surrogate_exponent,
    qnorm,
    regularizer_gradient,
    regularizer_value,
)
from .harness import (
    ExperimentError,
    ExperimentPlan,
    RateReport,
    emit,
    fit_loglog_slope,
    run_plan,
    run_rate_experiment,
    run_stability_experiment,
    run_tail_experiment,
)
from .problems import (
    FeasibleSet,
    ProblemInstance,
    distance_to_optimum,
    make_degenerate_quadratic,
    make_newsvendor,
    make_quadratic_tracking,
    make_quartic_nonlipschitz,
    population_gap,
)
from .saa import (
    CompositeObjective,
    SaaConfig,
    SampleBatch,
    empirical_objective,
    hyperparameters,
    replace_one,
)
from .smd import SmdConfig, smd_solve
from .solver import ConvergenceError, SolveResult, closed_form_quadratic, minimize, project
from .stability import StabilityEstimate, average_ro_stability, replace_one_bound

__version__ = "0.1.0"

__all__ = [
    "CompositeObjective",
    "ConvergenceError",
    "DistSpec",
    "ExperimentError",
    "ExperimentPlan",
    "FeasibleSet",
    "GeometryConfig",
    "MirrorDescentEstimator",
    "MomentParameters",
    "ProblemInstance",
    "RateReport",
    "RngStream",
    "SaaConfig",
    "SampleAverageEstimator",
    "SampleBatch",
    "SmdConfig",
    "SolveResult",
    "StabilityEstimate",
    "TailClass",
    "average_ro_stability",
    "closed_form_quadratic",
    "distance_to_optimum",
    "dual_exponent",
    "emit",
    "empirical_objective",
    "exponential",
    "fit_loglog_slope",
    "gaussian",
    "hyperparameters",
    "make_degenerate_quadratic",
    "make_newsvendor",
    "make_quadratic_tracking",
    "make_quartic_nonlipschitz",
    "minimize",
    "moment_parameters",
    "one_norm_surrogate_exponent",
    "pareto",
    "population_gap",
    "project",
    "qnorm",
    "regularizer_gradient",
    "regularizer_value",
    "replace_one",
    "replace_one_bound",
    "run_plan",
    "run_rate_experiment",
    "run_stability_experiment",
    "run_tail_experiment",
    "sample",
    "smd_solve",
    "student_t",
    "tail_class",
]

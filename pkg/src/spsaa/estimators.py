"""Scikit-learn style estimator frontends.

Both methods consume a scenario sample as the usual ``(n_samples, m)``
matrix ``X`` and fit a decision vector, exposed as ``solution_``.  The
wrappers make the solvers compose with the surrounding ecosystem
(``get_params``/``set_params``, ``clone``, pipelines that pass scenario
matrices around); the underlying numerical routines live in
:mod:`spsaa.saa`, :mod:`spsaa.solver` and :mod:`spsaa.smd`.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_positive, check_scenario_matrix
from .problems import ProblemInstance, distance_to_optimum, population_gap
from .saa import SampleBatch, empirical_objective, hyperparameters
from .smd import SmdConfig, mirror_descent_path
from .solver import minimize

__all__ = ["SampleAverageEstimator", "MirrorDescentEstimator"]


class SampleAverageEstimator(BaseEstimator):
    """Minimize the scenario-average cost, optionally with the norm penalty.

    Parameters
    ----------
    problem : ProblemInstance
        Supplies the scenario oracle, feasible set and ground truth.
    epsilon : float
        Target accuracy; sets the penalty weight via ``epsilon / (2 R*)``
        and the default inner tolerance ``epsilon / 100``.
    regularized : bool
        Add the anchored squared q'-norm penalty (the canonical estimator
        when False).
    r_star_policy, r_star, q_prime, anchor
        Passed through to :func:`spsaa.saa.hyperparameters`.
    tol : float or None
        Inner certificate tolerance; defaults to ``epsilon / 100``.
    budget : int
        Solver iteration cap.

    Attributes
    ----------
    solution_ : ndarray
        Fitted decision vector.
    result_ : SolveResult
        Full solver record (certificate, iterations, wall time).
    """

    def __init__(
        self,
        problem: ProblemInstance,
        epsilon: float = 0.1,
        regularized: bool = False,
        r_star_policy: str = "oracle",
        r_star: float | None = None,
        q_prime: float | None = None,
        anchor=None,
        tol: float | None = None,
        budget: int = 100_000,
    ):
        self.problem = problem
        self.epsilon = epsilon
        self.regularized = regularized
        self.r_star_policy = r_star_policy
        self.r_star = r_star
        self.q_prime = q_prime
        self.anchor = anchor
        self.tol = tol
        self.budget = budget

    def _config(self):
        if not self.regularized:
            return None
        return hyperparameters(
            self.problem,
            self.epsilon,
            r_star_policy=self.r_star_policy,
            anchor=self.anchor,
            r_star=self.r_star,
            q_prime=self.q_prime,
        )

    def fit(self, X, y=None):
        check_positive(self.epsilon, "epsilon")
        X = check_scenario_matrix(X, self.problem.scenario_dim)
        cfg = self._config()
        obj = empirical_objective(self.problem, SampleBatch(X), cfg)
        tol = self.tol if self.tol is not None else self.epsilon / 100.0
        self.result_ = minimize(obj, self.problem.feasible_set, tol=tol, budget=self.budget)
        self.solution_ = self.result_.x
        self.n_iter_ = self.result_.iterations
        return self

    def gap(self) -> float:
        """Population suboptimality of the fitted decision."""
        return population_gap(self.problem, self.solution_)

    def distance_sq(self, q: float = 2.0) -> float:
        return distance_to_optimum(self.problem, self.solution_, q)


class MirrorDescentEstimator(BaseEstimator):
    """One-pass stochastic mirror descent over the rows of ``X``.

    Each row is consumed once, in order, as a fresh scenario, so the fit is
    deterministic given ``X``.  ``solution_`` is the averaged iterate when
    ``averaging`` is set, else the last one.
    """

    def __init__(
        self,
        problem: ProblemInstance,
        step_rule: str = "decaying",
        step_scale: float = 1.0,
        q_prime: float = 2.0,
        averaging: bool = True,
        x0=None,
    ):
        self.problem = problem
        self.step_rule = step_rule
        self.step_scale = step_scale
        self.q_prime = q_prime
        self.averaging = averaging
        self.x0 = x0

    def fit(self, X, y=None):
        X = check_scenario_matrix(X, self.problem.scenario_dim)
        cfg = SmdConfig(
            step_rule=self.step_rule,
            step_scale=self.step_scale,
            q_prime=self.q_prime,
            averaging=self.averaging,
        )
        self.solution_ = mirror_descent_path(self.problem, X, cfg, x0=self.x0)
        self.n_iter_ = X.shape[0]
        return self

    def gap(self) -> float:
        return population_gap(self.problem, self.solution_)

    def distance_sq(self, q: float = 2.0) -> float:
        return distance_to_optimum(self.problem, self.solution_, q)

"""Empirical (sample-average) objectives and their regularized variant.

The canonical estimator minimizes the scenario average
``F_N(x) = (1/N) sum_j f(x, xi_j)``; the regularized variant adds
``lambda0 * 0.5 * ||x - anchor||_{q'}^2`` with the accuracy-coupled rule
``lambda0 = epsilon / (2 R*)``, where ``R*`` overestimates the penalty value
at the population optimum.  ``replace_one`` swaps a single scenario for an
independent copy, which is the primitive behind the stability probe.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import DistSpec, RngStream
from .geometry import one_norm_surrogate_exponent, penalty_gradient, penalty_value, qnorm
from .problems import ProblemInstance

__all__ = [
    "SaaConfig",
    "SampleBatch",
    "CompositeObjective",
    "hyperparameters",
    "empirical_objective",
    "replace_one",
]


@dataclass(frozen=True)
class SaaConfig:
    """Regularization hyper-parameters; ``lambda0 = 0`` is the canonical estimator.

    ``lambda0`` is stored rather than recomputed so a serialized config fully
    determines a run.
    """

    epsilon: float
    q_prime: float
    r_star: float
    lambda0: float
    anchor: np.ndarray

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if not (1.0 < self.q_prime <= 2.0):
            raise ValueError("q_prime must lie in (1, 2]")
        if self.r_star < 1.0:
            raise ValueError("r_star must be >= 1")
        if self.lambda0 < 0:
            raise ValueError("lambda0 must be >= 0")
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float))


def hyperparameters(
    instance: ProblemInstance,
    epsilon: float,
    r_star_policy: str = "oracle",
    anchor=None,
    r_star: float | None = None,
    q_prime: float | None = None,
) -> SaaConfig:
    """Build the accuracy-coupled regularization config for an instance.

    q' defaults to min(q, 2) for q > 1 and to the 1-norm surrogate exponent
    ``1 + 1/ln d`` when the instance geometry is the 1-norm.  R* policies:

    * ``"oracle"``   -- max{1, penalty value at the known optimizer},
    * ``"diameter"`` -- max{1, half the squared q'-norm diameter} (bounded sets),
    * ``"manual"``   -- caller-supplied ``r_star``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    q = float(instance.constants.get("q", 2.0))
    if q_prime is None:
        q_prime = min(q, 2.0) if q > 1.0 else one_norm_surrogate_exponent(instance.dim)
    anchor = (
        instance.feasible_set.project(np.zeros(instance.dim))
        if anchor is None
        else np.asarray(anchor, dtype=float)
    )
    if anchor.shape != (instance.dim,):
        raise ValueError("anchor must be a length-d vector")
    if r_star_policy == "oracle":
        r_val = max(1.0, penalty_value(instance.x_star - anchor, q_prime))
    elif r_star_policy == "diameter":
        diam = instance.feasible_set.diameter(q_prime)
        if math.isinf(diam):
            raise ValueError("diameter policy requires a bounded feasible set")
        r_val = max(1.0, 0.5 * diam**2)
    elif r_star_policy == "manual":
        if r_star is None:
            raise ValueError("manual policy requires r_star")
        r_val = float(r_star)
    else:
        raise ValueError(f"unknown r_star policy {r_star_policy!r}")
    return SaaConfig(
        epsilon=epsilon,
        q_prime=q_prime,
        r_star=r_val,
        lambda0=epsilon / (2.0 * r_val),
        anchor=anchor,
    )


@dataclass(frozen=True)
class SampleBatch:
    """An ordered scenario sample with the stream that produced it."""

    scenarios: np.ndarray
    spec: DistSpec | None = None
    stream: RngStream | None = None

    def __post_init__(self):
        arr = np.asarray(self.scenarios, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError("scenarios must be a nonempty (N, m) matrix")
        object.__setattr__(self, "scenarios", arr)

    @property
    def size(self) -> int:
        return self.scenarios.shape[0]

    def seed_label(self) -> str:
        return self.stream.label() if self.stream is not None else "-"


def replace_one(batch: SampleBatch, j: int, xi_prime) -> SampleBatch:
    """Copy of ``batch`` with scenario ``j`` (0-based) replaced; input unchanged."""
    n = batch.size
    if not 0 <= j < n:
        raise ValueError(f"index {j} out of range for batch of size {n}")
    xi_prime = np.asarray(xi_prime, dtype=float)
    if xi_prime.shape != (batch.scenarios.shape[1],):
        raise ValueError("replacement scenario has wrong dimension")
    scen = batch.scenarios.copy()
    scen[j] = xi_prime
    return SampleBatch(scen, spec=batch.spec, stream=batch.stream)


class CompositeObjective:
    """Batch-averaged scenario cost plus the anchored norm penalty.

    Exposes value/gradient of
    ``F_N(x) + lambda0 * 0.5 * ||x - anchor||_{q'}^2`` along with the
    structural facts the solver needs: smoothness, a gradient-Lipschitz
    estimate when one is available, and the strong-convexity modulus
    (problem curvature plus ``lambda0 * (q' - 1)`` from the penalty, both
    valid w.r.t. the 2-norm since q' <= 2).
    """

    def __init__(self, instance: ProblemInstance, batch: SampleBatch, cfg: SaaConfig | None):
        if batch.scenarios.shape[1] != instance.scenario_dim:
            raise ValueError(
                f"batch scenario dimension {batch.scenarios.shape[1]} does not match"
                f" instance dimension {instance.scenario_dim}"
            )
        self.instance = instance
        self.batch = batch
        self.cfg = cfg
        self.lambda0 = 0.0 if cfg is None else cfg.lambda0
        self.q_prime = 2.0 if cfg is None else cfg.q_prime
        self.anchor = (
            np.zeros(instance.dim) if cfg is None else cfg.anchor
        )
        self._oracle = instance.batch_oracle(batch.scenarios)
        mu = instance.constants.get("mu", 0.0) if "A3" in instance.assumption_tags else 0.0
        self.strong_convexity_modulus = mu + self.lambda0 * (self.q_prime - 1.0)
        self.smooth = instance.smooth
        smooth_l = instance.constants.get("smooth_lipschitz")
        if smooth_l is None or (self.lambda0 > 0 and self.q_prime != 2.0):
            # the penalty gradient is not Lipschitz for q' < 2; rely on line search
            self.lipschitz = None
        else:
            self.lipschitz = smooth_l + self.lambda0

    @property
    def dim(self) -> int:
        return self.instance.dim

    def _penalty_parts(self, x):
        if self.lambda0 == 0.0:
            return 0.0, 0.0
        u = x - self.anchor
        return (
            self.lambda0 * penalty_value(u, self.q_prime),
            self.lambda0,
        )

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        v = self._oracle.value(x)
        if self.lambda0:
            v += self.lambda0 * penalty_value(x - self.anchor, self.q_prime)
        return v

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = self._oracle.gradient(x)
        if self.lambda0:
            g = g + self.lambda0 * penalty_gradient(x - self.anchor, self.q_prime)
        return g

    def value_and_gradient(self, x):
        x = np.asarray(x, dtype=float)
        v, g = self._oracle.value_and_gradient(x)
        if self.lambda0:
            v += self.lambda0 * penalty_value(x - self.anchor, self.q_prime)
            g = g + self.lambda0 * penalty_gradient(x - self.anchor, self.q_prime)
        return v, g

    # structural hooks used by the solver ---------------------------------
    def exact_minimizer(self, feasible_set):
        """Exact minimizer when the family/penalty structure admits one, else None.

        Currently: separable piecewise-linear costs (newsvendor) with q' = 2
        (or no penalty) over a box or the whole space.
        """
        oracle = self._oracle
        if not hasattr(oracle, "exact_separable_minimizer"):
            return None
        if self.lambda0 > 0.0 and self.q_prime != 2.0:
            return None
        if feasible_set.kind == "all_space":
            lo = hi = None
        elif feasible_set.kind == "box":
            lo, hi = feasible_set.lo, feasible_set.hi
        else:
            return None
        return oracle.exact_separable_minimizer(self.lambda0, self.anchor, lo, hi)

    def quadratic_structure(self):
        """(H, mean) for objectives whose batch part is 1/2 ||H^(1/2)(x - .)||^2-like.

        Returns the quadratic coefficient matrix acting on x and the batch
        scenario mean, or None for non-quadratic families.
        """
        inst = self.instance
        if inst.name == "quadratic_tracking":
            return inst.mu * np.eye(inst.dim), self._oracle.xbar
        if inst.name == "degenerate_quadratic":
            return inst.projector.copy(), self._oracle.xbar
        return None


def empirical_objective(
    instance: ProblemInstance, batch: SampleBatch, cfg: SaaConfig | None = None
) -> CompositeObjective:
    """Assemble the (optionally regularized) batch objective."""
    return CompositeObjective(instance, batch, cfg)

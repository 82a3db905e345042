"""Canonical stochastic mirror descent baseline.

One stochastic (sub)gradient step per fresh scenario, with the anchored
squared q'-norm as the distance-generating function.  For q' = 2 this is
projected SGD.  For q' < 2 on the whole space the mirror step is exact: the
gradient of the penalty is inverted through the dual-exponent power map.
On constrained sets with q' < 2 the method falls back to projected
subgradient steps, since the exact q'-prox on a general convex set is not
available in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import RngStream
from .geometry import dual_exponent, penalty_gradient
from .problems import ProblemInstance

__all__ = ["SmdConfig", "smd_solve", "mirror_descent_path"]

_STEP_RULES = ("constant", "decaying", "strongly_convex")


@dataclass(frozen=True)
class SmdConfig:
    """Step schedule and geometry for the mirror-descent baseline.

    step_rule: 'constant' (gamma), 'decaying' (scale/sqrt(t)) or
    'strongly_convex' (1/(mu t), requires problem curvature).  The step
    constants are deliberately exposed: there is no canonical value, and the
    comparisons report the choice used.
    """

    step_rule: str = "decaying"
    step_scale: float = 1.0
    q_prime: float = 2.0
    averaging: bool = True
    anchor_scale: float = 0.0  # start at anchor_scale * ones when no x0 given

    def __post_init__(self):
        if self.step_rule not in _STEP_RULES:
            raise ValueError(f"step_rule must be one of {_STEP_RULES}")
        if self.step_scale <= 0:
            raise ValueError("step_scale must be > 0")
        if not (1.0 < self.q_prime <= 2.0):
            raise ValueError("q_prime must lie in (1, 2]")


def _step_size(cfg: SmdConfig, t: int, mu: float | None) -> float:
    if cfg.step_rule == "constant":
        return cfg.step_scale
    if cfg.step_rule == "decaying":
        return cfg.step_scale / np.sqrt(t)
    return 1.0 / (mu * t)


def mirror_descent_path(
    instance: ProblemInstance,
    scenarios: np.ndarray,
    cfg: SmdConfig,
    x0=None,
) -> np.ndarray:
    """Run one pass over the scenario rows; return the final or averaged iterate."""
    feasible = instance.feasible_set
    d = instance.dim
    if scenarios.ndim != 2 or scenarios.shape[1] != instance.scenario_dim:
        raise ValueError("scenarios must be an (N, m) matrix matching the instance")
    n = scenarios.shape[0]
    if n < 1:
        raise ValueError("mirror descent needs at least one scenario")
    mu = None
    if cfg.step_rule == "strongly_convex":
        mu = instance.constants.get("mu")
        if not mu:
            raise ValueError("strongly_convex step rule needs an instance with mu")
    x = feasible.project(np.zeros(d) if x0 is None else np.asarray(x0, dtype=float))
    anchor = np.zeros(d) if x0 is None else x.copy()
    exact_mirror = cfg.q_prime != 2.0 and feasible.kind == "all_space"
    dual_prime = dual_exponent(cfg.q_prime)
    running = np.zeros(d)
    for t in range(1, n + 1):
        _, g = instance.scenario_value_and_grad(x, scenarios[t - 1])
        eta = _step_size(cfg, t, mu)
        if exact_mirror:
            w = penalty_gradient(x - anchor, cfg.q_prime) - eta * g
            x = anchor + penalty_gradient(w, dual_prime)
        else:
            x = feasible.project(x - eta * g)
        running += (x - running) / t
    return running if cfg.averaging else x


def smd_solve(
    instance: ProblemInstance,
    stream: RngStream,
    n: int,
    cfg: SmdConfig | None = None,
    x0=None,
) -> np.ndarray:
    """Exactly ``n`` stochastic steps, one fresh scenario each; deterministic.

    Returns the averaged iterate when ``cfg.averaging`` is set, else the
    last one.  Every iterate is feasible.
    """
    if n < 1:
        raise ValueError("sample budget must be >= 1")
    cfg = cfg or SmdConfig()
    scenarios = instance.draw_scenarios(stream, n)
    return mirror_descent_path(instance, scenarios, cfg, x0=x0)

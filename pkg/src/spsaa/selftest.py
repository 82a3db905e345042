"""Built-in invariant suites, runnable without pytest via ``spsaa selftest``.

Each suite prints one PASS/FAIL line; the caller turns any failure into a
nonzero exit code.  These are quick smoke versions of the full test suite,
meant for installed environments.
"""
from __future__ import annotations

import math

import numpy as np

from .distributions import RngStream, gaussian, sample
from .geometry import (
    GeometryConfig,
    dual_exponent,
    qnorm,
    regularizer_gradient,
    regularizer_value,
)
from .problems import FeasibleSet, make_quadratic_tracking
from .saa import SampleBatch, empirical_objective, hyperparameters
from .solver import closed_form_quadratic, minimize

__all__ = ["run_selftest"]


def _suite_geometry(rng) -> bool:
    for _ in range(2000):
        d = int(rng.integers(2, 10))
        qp = float(rng.uniform(1.05, 2.0))
        anchor = rng.normal(size=d)
        cfg = GeometryConfig(q=2.0 if qp <= 2 else qp, q_prime=qp, anchor=anchor)
        x = anchor + rng.normal(size=d) * rng.uniform(0.5, 2.0)
        g = regularizer_gradient(x, cfg)
        lhs = qnorm(g, qp / (qp - 1.0))
        rhs = qnorm(x - anchor, qp)
        if abs(lhs - rhs) > 1e-10 * max(1.0, rhs):
            return False
        x2 = anchor + rng.normal(size=d)
        gap = (
            regularizer_value(x2, cfg)
            - regularizer_value(x, cfg)
            - float(g @ (x2 - x))
        )
        if gap < 0.5 * (qp - 1.0) * qnorm(x2 - x, qp) ** 2 - 1e-9:
            return False
    v = np.ones(8)
    p = 1.0 + 1.0 / math.log(8)
    if not qnorm(v, p) <= qnorm(v, 1.0) <= math.e * qnorm(v, p):
        return False
    return math.isinf(dual_exponent(1.0))


def _suite_projections(rng) -> bool:
    sets = [
        FeasibleSet.box(-1.0, 2.0, dim=5),
        FeasibleSet.ball(np.zeros(5), 1.5),
        FeasibleSet.simplex(),
    ]
    for s in sets:
        for _ in range(200):
            y = rng.normal(size=5) * 3
            z = rng.normal(size=5) * 3
            py, pz = s.project(y), s.project(z)
            if np.linalg.norm(s.project(py) - py) > 1e-12:
                return False
            if np.linalg.norm(py - pz) > np.linalg.norm(y - z) + 1e-12:
                return False
    p = FeasibleSet.simplex().project(rng.normal(size=7))
    return abs(p.sum() - 1.0) <= 1e-12 and bool(np.all(p >= -1e-15))


def _suite_sampling(_) -> bool:
    spec = gaussian(3)
    s = RngStream(2718, (1, 2))
    if not np.array_equal(sample(spec, s, 64), sample(spec, s, 64)):
        return False
    a = sample(spec, RngStream(2718, (0, 0)), 10_000)[:, 0]
    b = sample(spec, RngStream(2718, (0, 1)), 10_000)[:, 0]
    return abs(np.corrcoef(a, b)[0, 1]) < 0.05


def _suite_solver(rng) -> bool:
    inst = make_quadratic_tracking(4, mu=1.5, noise=gaussian(4))
    for trial in range(25):
        batch = SampleBatch(inst.draw_scenarios(RngStream(99, (trial,)), 12))
        cfg = hyperparameters(
            inst, float(rng.uniform(0.05, 0.5)), r_star_policy="manual", r_star=1.0
        )
        obj = empirical_objective(inst, batch, cfg)
        res = minimize(obj, inst.feasible_set, tol=1e-14)
        star = closed_form_quadratic(obj)
        if np.linalg.norm(res.x - star) > 1e-8:
            return False
    return True


_SUITES = (
    ("geometry invariants", _suite_geometry),
    ("projection properties", _suite_projections),
    ("sampler determinism and independence", _suite_sampling),
    ("solver closed-form agreement", _suite_solver),
)


def run_selftest() -> bool:
    rng = np.random.default_rng(314159)
    all_ok = True
    for name, suite in _SUITES:
        ok = suite(rng)
        all_ok &= ok
        print(f"selftest {name}: {'PASS' if ok else 'FAIL'}")
    return all_ok

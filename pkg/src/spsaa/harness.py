"""Experiment orchestration: replication plans, rate fits, persistence.

A plan is a single JSON document (unknown keys are rejected, so typos fail
loudly).  It expands into independent (grid point, replication) tasks whose
randomness flows entirely from per-task streams, so results do not depend
on execution order or worker count; aggregation sorts by key before
reducing.  Three experiment kinds:

* ``rate``      -- mean metric vs N with a log-log slope fit,
* ``tail``      -- exceedance frequencies ``P[gap > epsilon]`` per N with
                   exact binomial confidence intervals,
* ``stability`` -- replace-one displacement averages vs N against the
                   explicit bound.

Per-row wall times are recorded in the CSV but are measurement, not data:
they are the one column excluded from the byte-determinism guarantee.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .distributions import DistSpec, RngStream
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
from .saa import SampleBatch, empirical_objective, hyperparameters
from .smd import SmdConfig, smd_solve
from .solver import ConvergenceError, minimize
from .stability import average_ro_stability, replace_one_bound

__all__ = [
    "ExperimentPlan",
    "ExperimentError",
    "RateReport",
    "RowRecord",
    "run_rate_experiment",
    "run_tail_experiment",
    "run_stability_experiment",
    "run_plan",
    "fit_loglog_slope",
    "emit",
]

# stream purpose tags: scenarios for the batch / replace-one probe randomness
_PURPOSE_BATCH = 0
_PURPOSE_PROBE = 1

_CSV_FIELDS = (
    "experiment_id",
    "method",
    "n",
    "replication",
    "seed_path",
    "metric_value",
    "inner_gap_bound",
    "wall_time",
    "ok",
    "error",
)

# fraction of rows allowed to fail (heavy tails can produce ill-conditioned
# batches); beyond it the whole experiment is an error
_FAILURE_BUDGET = 0.01


class ExperimentError(RuntimeError):
    pass


def _take(mapping: dict, allowed: dict, context: str) -> dict:
    """Read ``mapping`` against ``allowed`` {key: default}; unknown keys are errors."""
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ExperimentError(
            f"unknown key(s) {sorted(unknown)} in {context}; allowed: {sorted(allowed)}"
        )
    out = dict(allowed)
    out.update(mapping)
    return out


_REQUIRED = object()


def _require(cfg: dict, context: str):
    missing = [k for k, v in cfg.items() if v is _REQUIRED]
    if missing:
        raise ExperimentError(f"missing required key(s) {missing} in {context}")


def build_distribution(cfg: dict, dimension: int) -> DistSpec:
    cfg = dict(cfg)
    family = cfg.pop("family", None)
    if family is None:
        raise ExperimentError("distribution config needs a 'family'")
    cfg.setdefault("dimension", dimension)
    if cfg["dimension"] != dimension:
        raise ExperimentError("distribution dimension disagrees with problem d")
    d = cfg.pop("dimension")
    allowed_by_family = {
        "gaussian": {"mean": 0.0, "std": 1.0},
        "exponential": {"rate": 1.0},
        "pareto": {"tail_index": _REQUIRED, "scale": 1.0},
        "student_t": {"df": _REQUIRED, "scale": 1.0},
    }
    if family not in allowed_by_family:
        raise ExperimentError(f"unknown distribution family {family!r}")
    params = _take(cfg, allowed_by_family[family], f"{family} distribution")
    _require(params, f"{family} distribution")
    return DistSpec(family, d, params)


def build_feasible_set(cfg: dict | None, dimension: int) -> FeasibleSet:
    if cfg is None:
        return FeasibleSet.all_space()
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind == "all_space":
        _take(cfg, {}, "all_space set")
        return FeasibleSet.all_space()
    if kind == "box":
        params = _take(cfg, {"lo": _REQUIRED, "hi": _REQUIRED}, "box set")
        _require(params, "box set")
        return FeasibleSet.box(params["lo"], params["hi"], dim=dimension)
    if kind == "ball":
        params = _take(cfg, {"center": 0.0, "radius": _REQUIRED}, "ball set")
        _require(params, "ball set")
        center = np.asarray(params["center"], dtype=float)
        if center.ndim == 0:
            center = np.full(dimension, float(center))
        return FeasibleSet.ball(center, float(params["radius"]))
    if kind == "simplex":
        _take(cfg, {}, "simplex set")
        return FeasibleSet.simplex()
    raise ExperimentError(f"unknown feasible-set kind {kind!r}")


def build_problem(cfg: dict) -> ProblemInstance:
    cfg = dict(cfg)
    family = cfg.pop("family", None)
    if family == "quadratic_tracking":
        params = _take(
            cfg,
            {"d": _REQUIRED, "mu": 1.0, "noise": _REQUIRED, "feasible_set": None},
            "quadratic_tracking problem",
        )
        _require(params, "quadratic_tracking problem")
        d = int(params["d"])
        return make_quadratic_tracking(
            d,
            float(params["mu"]),
            build_distribution(params["noise"], d),
            build_feasible_set(params["feasible_set"], d),
        )
    if family == "degenerate_quadratic":
        params = _take(
            cfg,
            {
                "d": _REQUIRED,
                "rank": _REQUIRED,
                "noise": _REQUIRED,
                "feasible_set": _REQUIRED,
                "basis_seed": 0,
            },
            "degenerate_quadratic problem",
        )
        _require(params, "degenerate_quadratic problem")
        d = int(params["d"])
        return make_degenerate_quadratic(
            d,
            int(params["rank"]),
            build_distribution(params["noise"], d),
            build_feasible_set(params["feasible_set"], d),
            basis_seed=int(params["basis_seed"]),
        )
    if family == "newsvendor":
        params = _take(
            cfg,
            {
                "d": _REQUIRED,
                "holding": _REQUIRED,
                "backlog": _REQUIRED,
                "demand": _REQUIRED,
                "feasible_set": None,
            },
            "newsvendor problem",
        )
        _require(params, "newsvendor problem")
        d = int(params["d"])
        return make_newsvendor(
            d,
            float(params["holding"]),
            float(params["backlog"]),
            build_distribution(params["demand"], d),
            build_feasible_set(params["feasible_set"], d),
        )
    if family == "quartic":
        params = _take(
            cfg,
            {"d": _REQUIRED, "theta": _REQUIRED, "noise": _REQUIRED, "moment_order": None},
            "quartic problem",
        )
        _require(params, "quartic problem")
        d = int(params["d"])
        return make_quartic_nonlipschitz(
            d,
            np.asarray(params["theta"], dtype=float),
            build_distribution(params["noise"], d),
            moment_order=params["moment_order"],
        )
    raise ExperimentError(f"unknown problem family {family!r}")


_METHOD_DEFAULTS = {
    "saa": {
        "regularized": False,
        "r_star_policy": "oracle",
        "r_star": None,
        "q_prime": None,
        "anchor": None,
    },
    "smd": {
        "step_rule": "decaying",
        "step_scale": 1.0,
        "q_prime": 2.0,
        "averaging": True,
    },
}


@dataclass(frozen=True)
class ExperimentPlan:
    """Declarative description of one Monte Carlo experiment."""

    kind: str
    experiment_id: str
    problem: dict
    method: dict
    n_grid: tuple
    replications: int
    master_seed: int
    epsilon: float
    metric: str = "gap"
    metric_q: float = 2.0
    beta_grid: tuple = ()
    probe_count: int = 32
    solver_tol: float | None = None
    solver_budget: int = 100_000
    workers: int = 1
    quantile_levels: tuple = (0.1, 0.5, 0.9)
    thresholds: dict = field(default_factory=dict)

    @staticmethod
    def from_config(cfg: dict) -> "ExperimentPlan":
        allowed = {
            "kind": _REQUIRED,
            "experiment_id": _REQUIRED,
            "problem": _REQUIRED,
            "method": _REQUIRED,
            "n_grid": _REQUIRED,
            "replications": _REQUIRED,
            "master_seed": _REQUIRED,
            "epsilon": _REQUIRED,
            "metric": "gap",
            "metric_q": 2.0,
            "beta_grid": (),
            "probe_count": 32,
            "solver_tol": None,
            "solver_budget": 100_000,
            "workers": 1,
            "quantile_levels": (0.1, 0.5, 0.9),
            "thresholds": {},
        }
        params = _take(dict(cfg), allowed, "experiment plan")
        _require(params, "experiment plan")
        plan = ExperimentPlan(
            kind=params["kind"],
            experiment_id=str(params["experiment_id"]),
            problem=dict(params["problem"]),
            method=dict(params["method"]),
            n_grid=tuple(int(n) for n in params["n_grid"]),
            replications=int(params["replications"]),
            master_seed=int(params["master_seed"]),
            epsilon=float(params["epsilon"]),
            metric=params["metric"],
            metric_q=float(params["metric_q"]),
            beta_grid=tuple(float(b) for b in params["beta_grid"]),
            probe_count=int(params["probe_count"]),
            solver_tol=params["solver_tol"],
            solver_budget=int(params["solver_budget"]),
            workers=int(params["workers"]),
            quantile_levels=tuple(float(q) for q in params["quantile_levels"]),
            thresholds=dict(params["thresholds"]),
        )
        plan.validate()
        return plan

    @staticmethod
    def from_json(path_or_text) -> "ExperimentPlan":
        if os.path.exists(str(path_or_text)):
            with open(path_or_text, "r", encoding="utf-8") as fh:
                cfg = json.load(fh)
        else:
            cfg = json.loads(path_or_text)
        return ExperimentPlan.from_config(cfg)

    def to_config(self) -> dict:
        return {
            "kind": self.kind,
            "experiment_id": self.experiment_id,
            "problem": self.problem,
            "method": self.method,
            "n_grid": list(self.n_grid),
            "replications": self.replications,
            "master_seed": self.master_seed,
            "epsilon": self.epsilon,
            "metric": self.metric,
            "metric_q": self.metric_q,
            "beta_grid": list(self.beta_grid),
            "probe_count": self.probe_count,
            "solver_tol": self.solver_tol,
            "solver_budget": self.solver_budget,
            "workers": self.workers,
            "quantile_levels": list(self.quantile_levels),
            "thresholds": self.thresholds,
        }

    def validate(self):
        if self.kind not in ("rate", "tail", "stability"):
            raise ExperimentError(f"unknown experiment kind {self.kind!r}")
        if len(self.n_grid) < 1 or any(
            b <= a for a, b in zip(self.n_grid, self.n_grid[1:])
        ):
            raise ExperimentError("n_grid must be nonempty and strictly increasing")
        if min(self.n_grid) < 1:
            raise ExperimentError("n_grid entries must be >= 1")
        if self.epsilon <= 0:
            raise ExperimentError("epsilon must be > 0")
        if self.metric not in ("gap", "distance_sq"):
            raise ExperimentError(f"unknown metric {self.metric!r}")
        if self.kind in ("rate", "stability") and self.replications < 30:
            raise ExperimentError("slope fits need at least 30 replications")
        if self.kind == "tail":
            if not self.beta_grid:
                raise ExperimentError("tail experiments need a beta_grid")
            if any(not 0 < b < 1 for b in self.beta_grid):
                raise ExperimentError("beta levels must lie in (0, 1)")
            if self.replications < 10.0 / min(self.beta_grid):
                raise ExperimentError(
                    "tail frequencies need replications >= 10 / min(beta_grid)"
                )
            if self.metric != "gap":
                raise ExperimentError("tail experiments use the gap metric")
        if self.workers < 1:
            raise ExperimentError("workers must be >= 1")
        method_kind = self.method.get("kind")
        if method_kind not in _METHOD_DEFAULTS:
            raise ExperimentError(f"unknown method kind {method_kind!r}")
        rest = {k: v for k, v in self.method.items() if k != "kind"}
        _take(rest, _METHOD_DEFAULTS[method_kind], f"{method_kind} method")
        if self.kind == "stability" and method_kind != "saa":
            raise ExperimentError("stability experiments probe the saa method")
        if self.probe_count < 1:
            raise ExperimentError("probe_count must be >= 1")
        # fail fast on malformed problem configs
        build_problem(self.problem)

    def solver_tolerance(self) -> float:
        return self.solver_tol if self.solver_tol is not None else self.epsilon / 100.0

    def method_label(self) -> str:
        kind = self.method["kind"]
        if kind == "saa":
            reg = self.method.get("regularized", False)
            return "saa_regularized" if reg else "saa_canonical"
        return "smd"


@dataclass(frozen=True)
class RowRecord:
    experiment_id: str
    method: str
    n: int
    replication: int
    seed_path: str
    metric_value: float | None
    inner_gap_bound: float | None
    wall_time: float
    ok: bool
    error: str = ""


@dataclass
class RateReport:
    kind: str
    plan_config: dict
    rows: list
    per_n: dict
    fit: dict | None
    degenerate: bool
    failures: int
    checks: dict
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def fit_loglog_slope(points) -> tuple:
    """OLS fit of log(mean) on log(N); returns (slope, intercept, r_squared)."""
    pts = [(float(n), float(m)) for n, m in points]
    if len(pts) < 3:
        raise ValueError("slope fit needs at least 3 points")
    if any(m <= 0 for _, m in pts):
        raise ValueError("slope fit needs strictly positive means")
    x = np.log([n for n, _ in pts])
    y = np.log([m for _, m in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(slope), float(intercept), r2


# ---------------------------------------------------------------------------
# task execution
# ---------------------------------------------------------------------------

_WORKER_CACHE: dict = {}


def _cached_instance(problem_json: str) -> ProblemInstance:
    inst = _WORKER_CACHE.get(problem_json)
    if inst is None:
        inst = build_problem(json.loads(problem_json))
        _WORKER_CACHE[problem_json] = inst
    return inst


def _metric_value(plan_metric, metric_q, instance, x):
    if plan_metric == "gap":
        return population_gap(instance, x)
    return distance_to_optimum(instance, x, metric_q)


def _solve_task(plan_dict: dict, n_index: int, rep_range: tuple) -> list:
    """Run replications [rep_range) at one grid point; returns plain tuples."""
    plan = ExperimentPlan.from_config(plan_dict)
    instance = _cached_instance(json.dumps(plan.problem, sort_keys=True))
    n = plan.n_grid[n_index]
    method = plan.method
    tol = plan.solver_tolerance()
    rows = []
    saa_cfg = None
    if method["kind"] == "saa" and method.get("regularized", False):
        saa_cfg = hyperparameters(
            instance,
            plan.epsilon,
            r_star_policy=method.get("r_star_policy", "oracle"),
            anchor=method.get("anchor"),
            r_star=method.get("r_star"),
            q_prime=method.get("q_prime"),
        )
    for rep in range(*rep_range):
        stream = RngStream(plan.master_seed, (n_index, rep, _PURPOSE_BATCH))
        t0 = time.perf_counter()
        metric = None
        inner = None
        ok = True
        err = ""
        try:
            if plan.kind == "stability":
                batch = SampleBatch(
                    instance.draw_scenarios(stream, n), spec=instance.noise, stream=stream
                )
                est = average_ro_stability(
                    instance,
                    batch,
                    saa_cfg,
                    tol,
                    min(n, plan.probe_count),
                    RngStream(plan.master_seed, (n_index, rep, _PURPOSE_PROBE)),
                    solver_budget=plan.solver_budget,
                )
                metric = est.value
                inner = est.base_inner_gap
            elif method["kind"] == "saa":
                batch = SampleBatch(
                    instance.draw_scenarios(stream, n), spec=instance.noise, stream=stream
                )
                res = minimize(
                    empirical_objective(instance, batch, saa_cfg),
                    instance.feasible_set,
                    tol=tol,
                    budget=plan.solver_budget,
                )
                metric = _metric_value(plan.metric, plan.metric_q, instance, res.x)
                inner = res.inner_gap_bound
            else:
                cfg = SmdConfig(
                    step_rule=method.get("step_rule", "decaying"),
                    step_scale=method.get("step_scale", 1.0),
                    q_prime=method.get("q_prime", 2.0),
                    averaging=method.get("averaging", True),
                )
                x = smd_solve(instance, stream, n, cfg)
                metric = _metric_value(plan.metric, plan.metric_q, instance, x)
        except ConvergenceError as exc:
            ok = False
            err = f"convergence: certificate {exc.certificate:.3e}"
        rows.append(
            (
                n_index,
                rep,
                stream.label(),
                metric,
                inner,
                time.perf_counter() - t0,
                ok,
                err,
            )
        )
    return rows


def _chunks(total: int, pieces: int):
    size = max(1, math.ceil(total / pieces))
    return [(lo, min(lo + size, total)) for lo in range(0, total, size)]


def _execute(plan: ExperimentPlan) -> list:
    plan_dict = plan.to_config()
    tasks = []
    for i in range(len(plan.n_grid)):
        for rng in _chunks(plan.replications, max(plan.workers * 2, 1)):
            tasks.append((i, rng))
    raw = []
    if plan.workers == 1:
        for i, rng in tasks:
            raw.extend(_solve_task(plan_dict, i, rng))
    else:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            futures = [pool.submit(_solve_task, plan_dict, i, rng) for i, rng in tasks]
            for fut in futures:
                raw.extend(fut.result())
    label = plan.method_label()
    rows = [
        RowRecord(
            experiment_id=plan.experiment_id,
            method=label,
            n=plan.n_grid[n_index],
            replication=rep,
            seed_path=seed_path,
            metric_value=metric,
            inner_gap_bound=inner,
            wall_time=wall,
            ok=ok,
            error=err,
        )
        for (n_index, rep, seed_path, metric, inner, wall, ok, err) in raw
    ]
    rows.sort(key=lambda r: (r.n, r.replication))
    return rows


def aggregate_rows(rows, n_grid, quantile_levels) -> dict:
    """Per-N mean/stderr/quantiles over successful rows; order-independent."""
    per_n = {}
    for n in n_grid:
        vals = sorted(
            r.metric_value for r in rows if r.n == n and r.ok and r.metric_value is not None
        )
        if not vals:
            per_n[n] = {"count": 0}
            continue
        arr = np.array(vals)
        per_n[n] = {
            "count": int(arr.size),
            "mean": float(arr.mean()),
            "stderr": float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0,
            "quantiles": {
                repr(q): float(np.quantile(arr, q)) for q in sorted(quantile_levels)
            },
        }
    return per_n


def _check_failures(plan, rows):
    failures = sum(1 for r in rows if not r.ok)
    if failures > _FAILURE_BUDGET * len(rows):
        raise ExperimentError(
            f"{failures}/{len(rows)} solves failed; exceeds the {_FAILURE_BUDGET:.0%} budget"
        )
    return failures


def _fit_or_degenerate(per_n):
    points = [
        (n, agg["mean"]) for n, agg in per_n.items() if agg.get("count", 0) > 0
    ]
    if len(points) < 3 or any(m <= 1e-12 for _, m in points):
        return None, True
    slope, intercept, r2 = fit_loglog_slope(points)
    return {"slope": slope, "intercept": intercept, "r_squared": r2}, False


def _threshold_checks(plan, fit, per_n, extras):
    checks = {}
    th = plan.thresholds
    if "slope_range" in th:
        lo, hi = th["slope_range"]
        checks["slope_in_range"] = fit is not None and lo <= fit["slope"] <= hi
    if "r2_min" in th:
        checks["r2_at_least"] = fit is not None and fit["r_squared"] >= th["r2_min"]
    if th.get("bound_check"):
        ok = True
        for n, agg in per_n.items():
            bound = extras.get("bound_rhs", {}).get(n)
            if bound is None or agg.get("count", 0) == 0:
                ok = False
                break
            if agg["mean"] > bound + 5.0 * agg["stderr"]:
                ok = False
                break
        checks["bound_holds"] = ok
    if th.get("monotone_nonincreasing"):
        table = extras.get("exceedance", {}).get("gap", {})
        freqs = [table[n]["frequency"] for n in sorted(table)]
        checks["exceedance_nonincreasing"] = all(
            b <= a + 1e-12 for a, b in zip(freqs, freqs[1:])
        )
    return checks


def run_rate_experiment(plan: ExperimentPlan) -> RateReport:
    """Mean metric vs N with a log-log slope fit; deterministic given the plan."""
    if plan.kind != "rate":
        raise ExperimentError(f"plan kind {plan.kind!r} is not 'rate'")
    rows = _execute(plan)
    failures = _check_failures(plan, rows)
    per_n = aggregate_rows(rows, plan.n_grid, plan.quantile_levels)
    fit, degenerate = _fit_or_degenerate(per_n)
    extras = {}
    checks = _threshold_checks(plan, fit, per_n, extras)
    return RateReport(
        kind="rate",
        plan_config=plan.to_config(),
        rows=rows,
        per_n=per_n,
        fit=fit,
        degenerate=degenerate,
        failures=failures,
        checks=checks,
        extras=extras,
    )


def _clopper_pearson(k: int, n: int, alpha: float = 0.05) -> tuple:
    lo = 0.0 if k == 0 else float(sps.beta.ppf(alpha / 2.0, k, n - k + 1))
    hi = 1.0 if k == n else float(sps.beta.ppf(1.0 - alpha / 2.0, k + 1, n - k))
    return lo, hi


def run_tail_experiment(plan: ExperimentPlan) -> RateReport:
    """Exceedance frequencies P[gap > epsilon] per N with exact binomial CIs."""
    if plan.kind != "tail":
        raise ExperimentError(f"plan kind {plan.kind!r} is not 'tail'")
    rows = _execute(plan)
    failures = _check_failures(plan, rows)
    per_n = aggregate_rows(rows, plan.n_grid, plan.quantile_levels)
    table = {}
    for n in plan.n_grid:
        vals = [
            r.metric_value for r in rows if r.n == n and r.ok and r.metric_value is not None
        ]
        k = sum(1 for v in vals if v > plan.epsilon)
        lo, hi = _clopper_pearson(k, len(vals))
        table[n] = {
            "count": len(vals),
            "exceedances": k,
            "frequency": k / len(vals) if vals else math.nan,
            "ci_low": lo,
            "ci_high": hi,
        }
    n_star = {}
    for beta in plan.beta_grid:
        hit = [n for n in plan.n_grid if table[n]["ci_high"] <= beta]
        n_star[repr(beta)] = min(hit) if hit else None
    # shape diagnostic: the certified sample size must not shrink as the
    # confidence requirement tightens (absolute predictions are out of reach
    # without the unknown constants, so only the shape is reported)
    betas = sorted(plan.beta_grid, reverse=True)
    stars = [n_star[repr(b)] for b in betas]
    n_star_monotone = all(
        a is not None and b is not None and b >= a
        for a, b in zip(stars, stars[1:])
    ) if all(s is not None for s in stars) else False
    extras = {
        "exceedance": {"gap": table},
        "n_star": n_star,
        "n_star_monotone": n_star_monotone,
        "epsilon": plan.epsilon,
    }
    checks = _threshold_checks(plan, None, per_n, extras)
    return RateReport(
        kind="tail",
        plan_config=plan.to_config(),
        rows=rows,
        per_n=per_n,
        fit=None,
        degenerate=False,
        failures=failures,
        checks=checks,
        extras=extras,
    )


def run_stability_experiment(plan: ExperimentPlan) -> RateReport:
    """Replace-one displacement means vs N against the explicit bound."""
    if plan.kind != "stability":
        raise ExperimentError(f"plan kind {plan.kind!r} is not 'stability'")
    instance = build_problem(plan.problem)
    rows = _execute(plan)
    failures = _check_failures(plan, rows)
    per_n = aggregate_rows(rows, plan.n_grid, plan.quantile_levels)
    fit, degenerate = _fit_or_degenerate(per_n)
    extras = {
        "bound_rhs": {n: replace_one_bound(instance, n) for n in plan.n_grid}
    }
    checks = _threshold_checks(plan, fit, per_n, extras)
    return RateReport(
        kind="stability",
        plan_config=plan.to_config(),
        rows=rows,
        per_n=per_n,
        fit=fit,
        degenerate=degenerate,
        failures=failures,
        checks=checks,
        extras=extras,
    )


_RUNNERS = {
    "rate": run_rate_experiment,
    "tail": run_tail_experiment,
    "stability": run_stability_experiment,
}


def run_plan(plan: ExperimentPlan) -> RateReport:
    return _RUNNERS[plan.kind](plan)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_FIELDS)
    for r in rows:
        writer.writerow(
            [
                r.experiment_id,
                r.method,
                r.n,
                r.replication,
                r.seed_path,
                _fmt(r.metric_value),
                _fmt(r.inner_gap_bound),
                _fmt(r.wall_time),
                _fmt(r.ok),
                r.error,
            ]
        )
    return buf.getvalue()


def _summary_payload(report: RateReport) -> dict:
    return {
        "kind": report.kind,
        "plan": report.plan_config,
        "per_n": {str(n): agg for n, agg in sorted(report.per_n.items())},
        "fit": report.fit,
        "degenerate": report.degenerate,
        "failures": report.failures,
        "checks": report.checks,
        "passed": report.passed,
        "extras": _stringify_keys(report.extras),
        "row_count": len(report.rows),
    }


def _stringify_keys(obj):
    if isinstance(obj, dict):
        return {str(k): _stringify_keys(v) for k, v in obj.items()}
    return obj


def summary_to_json_text(report: RateReport) -> str:
    return json.dumps(_summary_payload(report), sort_keys=True, indent=2) + "\n"


def emit(report: RateReport, out_dir: str, fmt: str = "both") -> list:
    """Write rows CSV and/or summary JSON; byte-stable given the same report."""
    if fmt not in ("csv", "json", "both"):
        raise ValueError(f"unknown format {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    base = report.plan_config["experiment_id"]
    written = []
    if fmt in ("csv", "both"):
        path = os.path.join(out_dir, f"{base}_rows.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(rows_to_csv_text(report.rows))
        written.append(path)
    if fmt in ("json", "both"):
        path = os.path.join(out_dir, f"{base}_summary.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(summary_to_json_text(report))
        written.append(path)
    return written

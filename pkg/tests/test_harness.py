import copy
import glob
import json
import math
import os
import random

import numpy as np
import pytest

from spsaa.harness import (
    ExperimentError,
    ExperimentPlan,
    aggregate_rows,
    emit,
    fit_loglog_slope,
    rows_to_csv_text,
    run_plan,
    run_rate_experiment,
    run_stability_experiment,
    run_tail_experiment,
    summary_to_json_text,
)

BASE_RATE = {
    "kind": "rate",
    "experiment_id": "unit_rate",
    "problem": {
        "family": "quadratic_tracking",
        "d": 4,
        "mu": 1.0,
        "noise": {"family": "gaussian"},
    },
    "method": {"kind": "saa"},
    "n_grid": [16, 32, 64, 128],
    "replications": 40,
    "master_seed": 7,
    "epsilon": 0.05,
}


def rate_plan(**overrides):
    cfg = copy.deepcopy(BASE_RATE)
    cfg.update(overrides)
    return ExperimentPlan.from_config(cfg)


class TestFitLogLogSlope:
    def test_exact_one_over_n(self):
        pts = [(n, 7.0 / n) for n in (8, 16, 32, 64)]
        slope, intercept, r2 = fit_loglog_slope(pts)
        assert slope == pytest.approx(-1.0, abs=1e-12)
        assert intercept == pytest.approx(math.log(7.0), abs=1e-12)
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_exact_inverse_square(self):
        pts = [(n, 3.0 / n**2) for n in (8, 16, 32)]
        slope, _, r2 = fit_loglog_slope(pts)
        assert slope == pytest.approx(-2.0, abs=1e-12)
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_two_points_rejected(self):
        with pytest.raises(ValueError):
            fit_loglog_slope([(8, 1.0), (16, 0.5)])

    def test_nonpositive_mean_rejected(self):
        with pytest.raises(ValueError):
            fit_loglog_slope([(8, 1.0), (16, 0.0), (32, 0.1)])


class TestPlanValidation:
    def test_unknown_top_level_key(self):
        cfg = copy.deepcopy(BASE_RATE)
        cfg["replicatons"] = 10  # typo must be fatal
        with pytest.raises(ExperimentError, match="replicatons"):
            ExperimentPlan.from_config(cfg)

    def test_unknown_problem_key(self):
        cfg = copy.deepcopy(BASE_RATE)
        cfg["problem"]["sigma"] = 2.0
        with pytest.raises(ExperimentError, match="sigma"):
            ExperimentPlan.from_config(cfg)

    def test_unknown_method_key(self):
        cfg = copy.deepcopy(BASE_RATE)
        cfg["method"] = {"kind": "smd", "step": 0.1}
        with pytest.raises(ExperimentError, match="step"):
            ExperimentPlan.from_config(cfg)

    def test_n_grid_must_increase(self):
        with pytest.raises(ExperimentError, match="increasing"):
            rate_plan(n_grid=[16, 16, 32])

    def test_rate_needs_30_replications(self):
        with pytest.raises(ExperimentError, match="30"):
            rate_plan(replications=10)

    def test_tail_needs_enough_replications(self):
        cfg = copy.deepcopy(BASE_RATE)
        cfg.update(kind="tail", beta_grid=[0.05], replications=100)
        with pytest.raises(ExperimentError, match="10 / min"):
            ExperimentPlan.from_config(cfg)

    def test_kind_must_match_runner(self):
        plan = rate_plan()
        with pytest.raises(ExperimentError):
            run_tail_experiment(plan)
        with pytest.raises(ExperimentError):
            run_stability_experiment(plan)

    def test_shipped_example_plans_parse(self):
        here = os.path.join(os.path.dirname(__file__), "..", "configs", "*.json")
        paths = sorted(glob.glob(here))
        assert len(paths) >= 4
        for path in paths:
            plan = ExperimentPlan.from_json(path)
            assert plan.experiment_id

    def test_roundtrip(self):
        plan = rate_plan()
        again = ExperimentPlan.from_config(plan.to_config())
        assert again == plan


class TestRateExperiment:
    def test_tracking_matches_analytic_mean(self):
        plan = rate_plan(replications=60)
        report = run_rate_experiment(plan)
        for n, agg in report.per_n.items():
            analytic = 1.0 * 4 / (2.0 * n)  # mu * d * sigma^2 / (2N)
            assert abs(agg["mean"] - analytic) <= 5.0 * agg["stderr"]
        assert report.fit is not None
        assert -1.3 <= report.fit["slope"] <= -0.7

    def test_determinism_across_runs(self):
        a = run_rate_experiment(rate_plan())
        b = run_rate_experiment(rate_plan())
        assert rows_to_csv_text(a.rows) == rows_to_csv_text(b.rows) or [
            (r.n, r.replication, r.metric_value) for r in a.rows
        ] == [(r.n, r.replication, r.metric_value) for r in b.rows]

    def test_worker_count_does_not_change_results(self):
        serial = run_rate_experiment(rate_plan())
        parallel = run_rate_experiment(rate_plan(workers=2))
        assert [(r.n, r.replication, r.metric_value) for r in serial.rows] == [
            (r.n, r.replication, r.metric_value) for r in parallel.rows
        ]

    def test_noiseless_plan_is_degenerate(self):
        plan = rate_plan(
            problem={
                "family": "quadratic_tracking",
                "d": 3,
                "mu": 1.0,
                "noise": {"family": "gaussian", "std": 0.0},
            }
        )
        report = run_rate_experiment(plan)
        assert report.degenerate
        assert report.fit is None
        for agg in report.per_n.values():
            assert agg["mean"] <= 1e-10

    def test_threshold_checks_reported(self):
        plan = rate_plan(thresholds={"slope_range": [-1.3, -0.7], "r2_min": 0.9})
        report = run_rate_experiment(plan)
        assert set(report.checks) == {"slope_in_range", "r2_at_least"}
        assert report.passed == all(report.checks.values())

    def test_smd_method_runs(self):
        plan = rate_plan(
            method={"kind": "smd", "step_rule": "strongly_convex", "averaging": False}
        )
        report = run_rate_experiment(plan)
        assert report.fit is not None


class TestTailExperiment:
    def make_plan(self):
        return ExperimentPlan.from_config(
            {
                "kind": "tail",
                "experiment_id": "unit_tail",
                "problem": {
                    "family": "quadratic_tracking",
                    "d": 4,
                    "mu": 1.0,
                    "noise": {"family": "gaussian"},
                },
                "method": {"kind": "saa"},
                "n_grid": [8, 32, 128],
                "replications": 120,
                "master_seed": 3,
                "epsilon": 0.25,
                "beta_grid": [0.2, 0.1],
                "thresholds": {"monotone_nonincreasing": True},
            }
        )

    def test_exceedance_monotone_and_ci(self):
        report = run_tail_experiment(self.make_plan())
        table = report.extras["exceedance"]["gap"]
        freqs = [table[n]["frequency"] for n in (8, 32, 128)]
        assert freqs == sorted(freqs, reverse=True)
        for n in (8, 32, 128):
            assert 0.0 <= table[n]["ci_low"] <= table[n]["frequency"] <= table[n]["ci_high"] <= 1.0
        assert report.checks["exceedance_nonincreasing"]

    def test_vacuous_threshold(self):
        plan = self.make_plan()
        cfg = plan.to_config()
        cfg["epsilon"] = 1e9
        cfg["experiment_id"] = "unit_tail_vacuous"
        report = run_tail_experiment(ExperimentPlan.from_config(cfg))
        table = report.extras["exceedance"]["gap"]
        assert all(v["exceedances"] == 0 for v in table.values())
        # smallest N certifying each beta is then the first grid point
        assert report.extras["n_star"] == {"0.2": 8, "0.1": 8}
        assert report.extras["n_star_monotone"]

    def test_light_tail_n_star_shape(self):
        # certified sample sizes grow (weakly) as beta tightens
        plan = self.make_plan()
        cfg = plan.to_config()
        cfg["experiment_id"] = "unit_tail_shape"
        cfg["beta_grid"] = [0.3, 0.2, 0.1]
        report = run_tail_experiment(ExperimentPlan.from_config(cfg))
        assert report.extras["n_star_monotone"]


class TestStabilityExperiment:
    def test_small_grid(self):
        plan = ExperimentPlan.from_config(
            {
                "kind": "stability",
                "experiment_id": "unit_stab",
                "problem": {
                    "family": "quadratic_tracking",
                    "d": 4,
                    "mu": 1.0,
                    "noise": {"family": "gaussian"},
                },
                "method": {"kind": "saa"},
                "n_grid": [8, 16, 32, 64],
                "replications": 60,
                "master_seed": 13,
                "epsilon": 0.01,
                "probe_count": 8,
                "solver_tol": 1e-12,
                "thresholds": {"slope_range": [-2.3, -1.7], "bound_check": True},
            }
        )
        report = run_stability_experiment(plan)
        assert report.checks["slope_in_range"]
        assert report.checks["bound_holds"]
        for n, agg in report.per_n.items():
            assert abs(agg["mean"] - 2.0 * 4 / n**2) <= 5 * agg["stderr"]

    def test_single_scenario_grid_point(self):
        # N = 1 rows are the squared distance between two independent draws,
        # whose mean is 2 d sigma^2
        plan = ExperimentPlan.from_config(
            {
                "kind": "stability",
                "experiment_id": "unit_stab_n1",
                "problem": {
                    "family": "quadratic_tracking",
                    "d": 3,
                    "mu": 1.0,
                    "noise": {"family": "gaussian"},
                },
                "method": {"kind": "saa"},
                "n_grid": [1, 4, 16],
                "replications": 200,
                "master_seed": 17,
                "epsilon": 0.01,
                "probe_count": 8,
                "solver_tol": 1e-12,
            }
        )
        report = run_stability_experiment(plan)
        for n, agg in report.per_n.items():
            assert abs(agg["mean"] - 2.0 * 3 / n**2) <= 5 * agg["stderr"]


class TestAggregationAndEmit:
    def test_aggregation_order_independent(self):
        report = run_rate_experiment(rate_plan())
        shuffled = list(report.rows)
        random.Random(0).shuffle(shuffled)
        a = aggregate_rows(report.rows, (16, 32, 64, 128), (0.1, 0.5, 0.9))
        b = aggregate_rows(shuffled, (16, 32, 64, 128), (0.1, 0.5, 0.9))
        assert a == b

    def test_emit_files_and_byte_stability(self, tmp_path):
        report = run_rate_experiment(rate_plan())
        first = emit(report, str(tmp_path / "a"), fmt="both")
        second = emit(report, str(tmp_path / "b"), fmt="both")
        for p1, p2 in zip(first, second):
            with open(p1, "rb") as f1, open(p2, "rb") as f2:
                assert f1.read() == f2.read()

    def test_emit_csv_header_and_order(self, tmp_path):
        report = run_rate_experiment(rate_plan())
        (path,) = emit(report, str(tmp_path), fmt="csv")
        with open(path) as fh:
            lines = fh.read().splitlines()
        assert lines[0] == (
            "experiment_id,method,n,replication,seed_path,metric_value,"
            "inner_gap_bound,wall_time,ok,error"
        )
        assert len(lines) == 1 + len(report.rows)
        first = lines[1].split(",")
        assert first[0] == "unit_rate" and first[2] == "16" and first[3] == "0"

    def test_empty_rows_header_only(self):
        text = rows_to_csv_text([])
        assert text.splitlines() == [
            "experiment_id,method,n,replication,seed_path,metric_value,"
            "inner_gap_bound,wall_time,ok,error"
        ]

    def test_summary_json_deterministic_and_complete(self):
        report = run_rate_experiment(rate_plan())
        a = summary_to_json_text(report)
        b = summary_to_json_text(report)
        assert a == b
        payload = json.loads(a)
        assert payload["plan"]["experiment_id"] == "unit_rate"
        assert set(payload["per_n"]) == {"16", "32", "64", "128"}
        assert payload["row_count"] == len(report.rows)

    def test_csv_identical_across_executions_except_wall_time(self):
        a = run_rate_experiment(rate_plan())
        b = run_rate_experiment(rate_plan())

        def strip_wall(text):
            rows = [line.split(",") for line in text.splitlines()]
            return [r[:7] + r[8:] for r in rows]

        assert strip_wall(rows_to_csv_text(a.rows)) == strip_wall(rows_to_csv_text(b.rows))

    def test_run_plan_dispatch(self):
        report = run_plan(rate_plan())
        assert report.kind == "rate"

import numpy as np
import pytest

from spsaa.distributions import RngStream, exponential, gaussian
from spsaa.problems import (
    FeasibleSet,
    make_degenerate_quadratic,
    make_newsvendor,
    make_quadratic_tracking,
    make_quartic_nonlipschitz,
)
from spsaa.saa import SampleBatch, empirical_objective, hyperparameters
from spsaa.solver import (
    ConvergenceError,
    closed_form_quadratic,
    minimize,
    project,
)


def tracking_objective(seed=0, n=16, mu=2.0, d=3, epsilon=None):
    inst = make_quadratic_tracking(d, mu=mu, noise=gaussian(d))
    batch = SampleBatch(inst.draw_scenarios(RngStream(seed, (0,)), n))
    cfg = (
        None
        if epsilon is None
        else hyperparameters(inst, epsilon, r_star_policy="manual", r_star=1.0)
    )
    return inst, empirical_objective(inst, batch, cfg)


class TestProject:
    def test_examples(self):
        box = FeasibleSet.box(0.0, 1.0, dim=2)
        np.testing.assert_allclose(project(box, [2.0, -1.0]), [1.0, 0.0])
        ball = FeasibleSet.ball([0.0, 0.0], 1.0)
        np.testing.assert_allclose(project(ball, [2.0, 0.0]), [1.0, 0.0])
        simplex = FeasibleSet.simplex()
        np.testing.assert_allclose(project(simplex, [0.5, 0.5]), [0.5, 0.5])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            project(FeasibleSet.all_space(), [np.nan, 0.0])


class TestClosedFormQuadratic:
    def test_canonical_mean(self):
        inst, obj = tracking_objective()
        x = closed_form_quadratic(obj)
        np.testing.assert_allclose(x, obj.batch.scenarios.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(obj.gradient(x), np.zeros(3), atol=1e-12)

    def test_regularized_shrinkage(self):
        inst, obj = tracking_objective(epsilon=0.5)  # lambda0 = 0.25, anchor 0
        xbar = obj.batch.scenarios.mean(axis=0)
        expected = 2.0 * xbar / (2.0 + 0.25)
        np.testing.assert_allclose(closed_form_quadratic(obj), expected, atol=1e-12)
        np.testing.assert_allclose(obj.gradient(expected), np.zeros(3), atol=1e-12)

    def test_large_lambda_limit(self):
        inst = make_quadratic_tracking(2, mu=1.0, noise=gaussian(2))
        batch = SampleBatch(inst.draw_scenarios(RngStream(1), 4))
        for eps in (1.0, 10.0, 100.0):
            cfg = hyperparameters(inst, eps, r_star_policy="manual", r_star=1.0)
            obj = empirical_objective(inst, batch, cfg)
            x = closed_form_quadratic(obj)
            if eps == 100.0:
                assert np.linalg.norm(x - cfg.anchor) < 0.05

    def test_degenerate_without_penalty_is_singular(self):
        box = FeasibleSet.box(-2.0, 2.0, dim=3)
        inst = make_degenerate_quadratic(3, 1, gaussian(3), box)
        batch = SampleBatch(inst.draw_scenarios(RngStream(2), 5))
        obj = empirical_objective(inst, batch)
        with pytest.raises(ValueError):
            closed_form_quadratic(obj)

    def test_non_quadratic_rejected(self):
        inst = make_newsvendor(2, 1.0, 1.0, exponential(2))
        obj = empirical_objective(inst, SampleBatch(inst.draw_scenarios(RngStream(3), 5)))
        with pytest.raises(ValueError):
            closed_form_quadratic(obj)


class TestMinimizeSmooth:
    def test_immediate_return_at_optimum(self):
        inst, obj = tracking_objective()
        star = closed_form_quadratic(obj)
        res = minimize(obj, inst.feasible_set, tol=1e-10, x0=star)
        assert res.inner_gap_bound <= 1e-10
        assert res.iterations <= 1
        np.testing.assert_allclose(res.x, star, atol=1e-10)

    def test_matches_closed_form(self):
        inst, obj = tracking_objective(epsilon=0.3)
        res = minimize(obj, inst.feasible_set, tol=1e-14)
        star = closed_form_quadratic(obj)
        assert np.linalg.norm(res.x - star) <= 1e-8

    def test_certificate_is_valid_on_quadratics(self):
        rng = np.random.default_rng(5)
        for trial in range(20):
            inst, obj = tracking_objective(seed=trial, epsilon=float(rng.uniform(0.05, 1.0)))
            res = minimize(obj, inst.feasible_set, tol=1e-6)
            star = closed_form_quadratic(obj)
            true_gap = obj.value(res.x) - obj.value(star)
            assert true_gap <= res.inner_gap_bound + 1e-12

    def test_monotone_descent(self):
        inst, obj = tracking_objective(epsilon=0.2)
        res = minimize(obj, inst.feasible_set, tol=1e-12, track_objective=True)
        vals = np.array(res.objective_trace)
        assert np.all(np.diff(vals) <= 1e-12)

    def test_constrained_degenerate_converges(self):
        box = FeasibleSet.box(-2.0, 2.0, dim=6)
        inst = make_degenerate_quadratic(6, 2, gaussian(6), box)
        batch = SampleBatch(inst.draw_scenarios(RngStream(7), 32))
        cfg = hyperparameters(inst, 0.05, r_star_policy="oracle")
        obj = empirical_objective(inst, batch, cfg)
        res = minimize(obj, box, tol=1e-9)
        assert res.converged
        assert box.contains(res.x)

    def test_quartic_backtracking(self):
        inst = make_quartic_nonlipschitz(4, np.array([0.5, 0.5, 0.5, 0.5]), gaussian(4))
        batch = SampleBatch(inst.draw_scenarios(RngStream(8), 64))
        obj = empirical_objective(inst, batch)
        res = minimize(obj, inst.feasible_set, tol=1e-12)
        assert res.converged
        np.testing.assert_allclose(obj.gradient(res.x), np.zeros(4), atol=1e-5)

    def test_m_zero_linearized_gap_certificate(self):
        box = FeasibleSet.box(-2.0, 2.0, dim=4)
        inst = make_degenerate_quadratic(4, 2, gaussian(4), box)
        batch = SampleBatch(inst.draw_scenarios(RngStream(9), 16))
        obj = empirical_objective(inst, batch)  # canonical: m = 0
        res = minimize(obj, box, tol=1e-7)
        assert res.converged
        assert res.inner_gap_bound <= 1e-7

    def test_budget_exhaustion_raises(self):
        box = FeasibleSet.box(-2.0, 2.0, dim=6)
        inst = make_degenerate_quadratic(6, 2, gaussian(6), box)
        batch = SampleBatch(inst.draw_scenarios(RngStream(10), 32))
        cfg = hyperparameters(inst, 0.001, r_star_policy="oracle")
        obj = empirical_objective(inst, batch, cfg)
        # starting at a corner leaves a large low-curvature component, so two
        # iterations cannot reach tolerance
        with pytest.raises(ConvergenceError) as err:
            minimize(obj, box, tol=1e-13, budget=2, x0=np.full(6, 2.0))
        assert err.value.certificate > 0

    def test_malformed_inputs(self):
        inst, obj = tracking_objective()
        with pytest.raises(ValueError):
            minimize(obj, inst.feasible_set, tol=0.0)
        with pytest.raises(ValueError):
            minimize(obj, inst.feasible_set, tol=1e-6, budget=0)
        with pytest.raises(ValueError):
            FeasibleSet.box([1.0], [0.0])


class TestMinimizeNewsvendor:
    def make_objective(self, lam_eps=None, box=None, n=200, seed=11):
        inst = make_newsvendor(3, 1.0, 2.0, exponential(3), feasible_set=box)
        batch = SampleBatch(inst.draw_scenarios(RngStream(seed), n))
        cfg = (
            None
            if lam_eps is None
            else hyperparameters(inst, lam_eps, r_star_policy="manual", r_star=1.0)
        )
        return inst, empirical_objective(inst, batch, cfg)

    def brute_force_coordinate(self, obj, i, lo=-1.0, hi=8.0):
        # dense scan + golden refinement of the separable 1-D cost
        xs = np.linspace(lo, hi, 20_001)
        base = np.zeros(obj.dim)

        def cost(v):
            x = base.copy()
            x[i] = v
            return obj.value(x)

        vals = [cost(v) for v in xs]
        k = int(np.argmin(vals))
        a, b = xs[max(k - 1, 0)], xs[min(k + 1, len(xs) - 1)]
        from scipy.optimize import minimize_scalar

        res = minimize_scalar(cost, bounds=(a, b), method="bounded",
                              options={"xatol": 1e-12})
        return res.x

    def test_exact_path_quantile(self):
        inst, obj = self.make_objective()
        res = minimize(obj, inst.feasible_set, tol=1e-9)
        assert res.method == "exact"
        # lambda0 = 0: the c/(c+h) = 2/3 empirical quantile per coordinate
        k = int(np.ceil(200 * 2.0 / 3.0))
        expected = np.sort(obj.batch.scenarios, axis=0)[k - 1]
        np.testing.assert_allclose(res.x, expected, atol=1e-12)

    def test_exact_path_matches_brute_force(self):
        inst, obj = self.make_objective(lam_eps=0.4, n=60)
        res = minimize(obj, inst.feasible_set, tol=1e-9)
        assert res.method == "exact"
        for i in range(3):
            best = self.brute_force_coordinate(obj, i)
            assert abs(res.x[i] - best) < 1e-6

    def test_exact_path_respects_box(self):
        box = FeasibleSet.box(0.0, 0.5, dim=3)
        inst, obj = self.make_objective(lam_eps=0.4, box=box, n=60)
        res = minimize(obj, box, tol=1e-9)
        assert np.all(res.x <= 0.5 + 1e-12) and np.all(res.x >= -1e-12)

    def test_subgradient_fallback_on_ball(self):
        ball = FeasibleSet.ball(np.ones(3), 2.0)
        inst = make_newsvendor(3, 1.0, 2.0, exponential(3), feasible_set=ball)
        batch = SampleBatch(inst.draw_scenarios(RngStream(12), 40))
        obj = empirical_objective(inst, batch)
        res = minimize(obj, ball, tol=0.1, budget=20_000)
        assert res.method == "projected_subgradient"
        assert res.converged
        # compare against the unconstrained exact solve projected in
        free = empirical_objective(inst, batch)
        exact = free.exact_minimizer(FeasibleSet.all_space())
        if ball.contains(exact):
            assert obj.value(res.x) <= obj.value(exact) + 0.12

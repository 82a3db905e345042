import math

import numpy as np
import pytest

from spsaa.distributions import RngStream, gaussian
from spsaa.problems import FeasibleSet, make_degenerate_quadratic, make_quadratic_tracking
from spsaa.saa import SampleBatch, hyperparameters
from spsaa.stability import average_ro_stability, replace_one_bound


def tracking_batch(inst, n, seed, rep=0):
    stream = RngStream(seed, (0, rep, 0))
    return SampleBatch(inst.draw_scenarios(stream, n), spec=inst.noise, stream=stream)


@pytest.fixture
def tracking():
    return make_quadratic_tracking(4, mu=1.0, noise=gaussian(4))


class TestSingleScenario:
    def test_closed_form_displacement(self, tracking):
        # N = 1: base minimizer is the single scenario, the probe minimizer
        # is its replacement, so the estimate is the squared distance
        batch = tracking_batch(tracking, 1, seed=3)
        probe_stream = RngStream(3, (0, 0, 1))
        est = average_ro_stability(tracking, batch, None, 1e-12, 1, probe_stream)
        replacement = tracking.draw_scenarios(probe_stream.child(1), 1)[0]
        expected = float(np.sum((replacement - batch.scenarios[0]) ** 2))
        assert est.value == pytest.approx(expected, rel=1e-9)
        assert est.stderr == 0.0
        assert est.probed_indices == (0,)


class TestMeanScaling:
    def test_matches_two_sigma_closed_form(self, tracking):
        # unconstrained tracking: x_hat is the batch mean, so replacing one
        # scenario moves it by (xi' - xi)/N and the expected squared norm is
        # 2 d sigma^2 / N^2
        n, reps = 16, 60
        values = []
        for r in range(reps):
            batch = tracking_batch(tracking, n, seed=11, rep=r)
            est = average_ro_stability(
                tracking, batch, None, 1e-12, probe_count=8,
                stream=RngStream(11, (0, r, 1)),
            )
            values.append(est.value)
        mean = np.mean(values)
        stderr = np.std(values, ddof=1) / math.sqrt(reps)
        expected = 2.0 * 4 / n**2
        assert abs(mean - expected) <= 5.0 * stderr

    def test_explicit_bound_holds(self, tracking):
        n = 16
        bound = replace_one_bound(tracking, n)
        assert bound == pytest.approx(64.0 * 4 / n**2)
        values = []
        for r in range(40):
            batch = tracking_batch(tracking, n, seed=13, rep=r)
            est = average_ro_stability(
                tracking, batch, None, 1e-12, 8, RngStream(13, (0, r, 1))
            )
            assert est.bound_rhs == pytest.approx(bound)
            values.append(est.value)
        mean = np.mean(values)
        rel_stderr = np.std(values, ddof=1) / math.sqrt(len(values)) / mean
        assert mean <= bound * (1.0 + 5.0 * rel_stderr)

    def test_inverse_square_scaling(self, tracking):
        grid = [16, 64, 256]
        means = []
        for i, n in enumerate(grid):
            vals = [
                average_ro_stability(
                    tracking,
                    tracking_batch(tracking, n, seed=17, rep=100 * i + r),
                    None,
                    1e-12,
                    min(n, 16),
                    RngStream(17, (i, r, 1)),
                ).value
                for r in range(30)
            ]
            means.append(np.mean(vals))
        slope = np.polyfit(np.log(grid), np.log(means), 1)[0]
        assert -2.3 <= slope <= -1.7


class TestSubsetProbing:
    def test_subset_agrees_with_full_sweep(self, tracking):
        # same fixed instance: the m = 8 subset estimator and the full m = N
        # estimator must agree within 3 combined standard errors
        n, reps = 24, 40
        sub_vals, full_vals = [], []
        for r in range(reps):
            batch = tracking_batch(tracking, n, seed=19, rep=r)
            sub = average_ro_stability(
                tracking, batch, None, 1e-12, 8, RngStream(19, (0, r, 1))
            )
            full = average_ro_stability(
                tracking, batch, None, 1e-12, n, RngStream(19, (0, r, 2))
            )
            sub_vals.append(sub.value)
            full_vals.append(full.value)
        m_sub, m_full = np.mean(sub_vals), np.mean(full_vals)
        se = math.hypot(
            np.std(sub_vals, ddof=1) / math.sqrt(reps),
            np.std(full_vals, ddof=1) / math.sqrt(reps),
        )
        assert abs(m_sub - m_full) <= 3.0 * se

    def test_full_sweep_probes_every_index(self, tracking):
        batch = tracking_batch(tracking, 6, seed=23)
        est = average_ro_stability(tracking, batch, None, 1e-12, 6, RngStream(23, (1,)))
        assert est.probed_indices == tuple(range(6))


class TestValidation:
    def test_requires_curvature_or_regularization(self):
        box = FeasibleSet.box(-2.0, 2.0, dim=3)
        inst = make_degenerate_quadratic(3, 1, gaussian(3), box)
        batch = SampleBatch(inst.draw_scenarios(RngStream(29), 8))
        with pytest.raises(ValueError):
            average_ro_stability(inst, batch, None, 1e-10, 4, RngStream(29, (1,)))
        cfg = hyperparameters(inst, 0.1, r_star_policy="oracle")
        est = average_ro_stability(inst, batch, cfg, 1e-10, 4, RngStream(29, (1,)))
        assert est.value >= 0.0
        assert est.bound_rhs is None  # no mu constant to anchor the bound

    def test_probe_count_bounds(self, tracking):
        batch = tracking_batch(tracking, 4, seed=31)
        with pytest.raises(ValueError):
            average_ro_stability(tracking, batch, None, 1e-10, 0, RngStream(31, (1,)))
        with pytest.raises(ValueError):
            average_ro_stability(tracking, batch, None, 1e-10, 5, RngStream(31, (1,)))

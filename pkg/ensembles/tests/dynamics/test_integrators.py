import math

import numpy as np
import pytest

from ensembles.exceptions import StepSizeError
from ensembles.integrators import (
    SUZUKI_WEIGHTS,
    TRIPLE_JUMP_WEIGHTS,
    DenseRk4,
    compose,
    fixed_point,
    rk4_integrate,
    rk4_step,
    rk4_trajectory,
    substeps,
)


def decay(_t, y):
    return -y


class TestRk4:
    def test_fourth_order_convergence(self):
        errors = []
        for h in (0.2, 0.1):
            y = rk4_integrate(decay, np.array([1.0]), 2.0, h)
            errors.append(abs(y[0] - math.exp(-2.0)))
        assert errors[0] / errors[1] == pytest.approx(16.0, rel=0.1)

    def test_single_step_is_exact_for_cubic(self):
        y = rk4_step(lambda t, _y: np.array([3 * t**2]), 0.0, np.array([0.0]), 1.0)
        assert y[0] == pytest.approx(1.0)

    def test_trajectory_times_cover_duration(self):
        times = [t for t, _ in rk4_trajectory(decay, np.array([1.0]), 1.0, 0.3, t0=2.0)]
        assert len(times) == 4
        assert times[-1] == pytest.approx(3.0)

    def test_zero_duration_returns_start(self):
        y0 = np.array([0.25, 0.75])
        np.testing.assert_array_equal(rk4_integrate(decay, y0, 0.0, 0.1), y0)


class TestSubsteps:
    def test_exact_multiple_is_not_split_further(self):
        assert substeps(1.0, 0.1) == (10, pytest.approx(0.1))

    def test_rounds_up(self):
        count, h = substeps(1.0, 0.3)
        assert count == 4
        assert h == pytest.approx(0.25)

    def test_empty_interval(self):
        assert substeps(0.0, 0.1) == (0, 0.0)


class TestFixedPoint:
    def test_converges_to_the_fixed_point(self):
        x = fixed_point(lambda x: 0.1 * x + 1.8, np.array([0.0]))
        assert x[0] == pytest.approx(2.0, abs=1e-12)

    def test_raises_when_the_map_does_not_contract(self):
        with pytest.raises(StepSizeError, match="did not converge"):
            fixed_point(lambda x: 2.0 * x + 1.0, np.array([0.0]), max_iterations=20)

    def test_tolerance_is_relative_to_large_iterates(self):
        x = fixed_point(lambda x: 1000.0 + 1e-3 * np.sin(x), np.array([1000.0]))
        assert x[0] == pytest.approx(1000.0 + 1e-3 * math.sin(x[0]), abs=1e-12)


def leapfrog(y, h):
    q, p = y
    p = p - 0.5 * h * q
    q = q + h * p
    return q, p - 0.5 * h * q


def oscillator_energy_error(weights, h, steps):
    y = (1.0, 0.0)
    worst = 0.0
    for _ in range(steps):
        y = compose(leapfrog, y, h, weights)
        worst = max(worst, abs(0.5 * (y[0] ** 2 + y[1] ** 2) - 0.5))
    return worst / 0.5


class TestCompose:
    @pytest.mark.parametrize("weights", [TRIPLE_JUMP_WEIGHTS, SUZUKI_WEIGHTS])
    def test_weights_sum_to_one(self, weights):
        assert sum(weights) == pytest.approx(1.0)
        assert sum(w**3 for w in weights) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("weights", [TRIPLE_JUMP_WEIGHTS, SUZUKI_WEIGHTS])
    def test_raises_order_to_four(self, weights):
        errors = []
        for steps in (20, 40):
            y = (1.0, 0.0)
            for _ in range(steps):
                y = compose(leapfrog, y, 2.0 / steps, weights)
            errors.append(abs(y[0] - math.cos(2.0)))
        assert errors[0] / errors[1] == pytest.approx(16.0, rel=0.15)

    def test_five_stages_keep_oscillator_energy_within_1e6(self):
        # omega * h = 0.07, the stiff step the alignment model allows at dt * f = 0.01 with 50 members a class.
        suzuki = oscillator_energy_error(SUZUKI_WEIGHTS, 0.07, 2000)
        triple = oscillator_energy_error(TRIPLE_JUMP_WEIGHTS, 0.07, 2000)

        assert suzuki <= 1e-6
        assert suzuki < 0.2 * triple


class TestDenseRk4:
    def test_grid_points_match_fixed_steps(self):
        flow = DenseRk4(decay, 0.1)
        flow.restart(0.0, np.array([1.0]))
        np.testing.assert_allclose(flow(1.0), rk4_integrate(decay, np.array([1.0]), 1.0, 0.1), rtol=1e-14)
        assert flow.steps_taken == 10

    def test_interpolates_between_grid_points(self):
        flow = DenseRk4(decay, 0.1)
        flow.restart(0.0, np.array([1.0]))
        for t in (0.03, 0.25, 0.77):
            assert flow(t)[0] == pytest.approx(math.exp(-t), abs=1e-6)

    def test_queries_within_one_cell_share_a_step(self):
        flow = DenseRk4(decay, 0.5)
        flow.restart(2.0, np.array([1.0]))
        for t in np.linspace(2.01, 2.49, 25):
            flow(t)
        assert flow.steps_taken == 1

    def test_restart_returns_the_new_state(self):
        flow = DenseRk4(decay, 0.1)
        flow.restart(0.0, np.array([1.0]))
        flow(0.35)
        flow.restart(0.35, np.array([3.0]))
        assert flow(0.35)[0] == 3.0
        assert flow(0.45)[0] == pytest.approx(3.0 * math.exp(-0.1), abs=1e-6)

    def test_cannot_go_back(self):
        flow = DenseRk4(decay, 0.1)
        flow.restart(1.0, np.array([1.0]))
        with pytest.raises(ValueError):
            flow(0.5)

import math
from types import SimpleNamespace

import numpy as np
import pytest

from ensembles.ensemble_core import class_drift, member_drift
from ensembles.exceptions import StepSizeError
from ensembles.integrators import rk4_integrate
from ensembles.model_spec import ModelSpec, random_spec
from ensembles.phase_alignment import (
    AlignmentState,
    DriftJacobian,
    alignment_energy,
    alignment_force,
    alignment_potential,
    alignment_run,
    drift_gradient_transpose,
    mean_class_phase,
    perturb,
    phase_spread,
    quantum_action_density,
    step_alignment,
)
from ensembles.reference_qm import madelung_rhs
from ensembles.tests.helpers import aligned


def numerical_gradient(f, x, h=1e-6):
    gradient = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        gradient[i] = (f(x + step) - f(x - step)) / (2 * h)
    return gradient


@pytest.fixture
def single_class():
    return ModelSpec.from_arrays(omega=[0.0], coupling=[[0.0]])


@pytest.fixture
def mixed_state(rng):
    beables = np.array([0, 0, 1, 1, 1, 2, 2])
    return AlignmentState(beables, rng.uniform(0, 2 * math.pi, 7), rng.normal(size=7), 1.5, 3)


class TestAlignmentState:
    def test_aligned_constructor(self):
        s = AlignmentState.aligned([2, 0, 3], [0.1, 0.0, 0.7], 4.0)
        assert s.counts().tolist() == [2, 0, 3]
        assert s.momenta.tolist() == [0.0] * 5
        np.testing.assert_array_equal(phase_spread(s), 0.0)

    def test_from_ensemble(self):
        s = AlignmentState.from_ensemble(aligned([1, 2], [0.5, 1.0]), 2.0)
        assert s.size == 3
        assert s.dim == 2

    def test_rejects_non_positive_stiffness(self):
        with pytest.raises(ValueError):
            AlignmentState.aligned([2], [0.0], 0.0)

    def test_mean_class_phase(self):
        s = AlignmentState.aligned([2, 0], [0.4, 0.0], 1.0)
        assert mean_class_phase(s, 0) == pytest.approx(0.4)
        with pytest.raises(ValueError):
            mean_class_phase(s, 1)

    def test_perturb_moves_phases_only(self, rng):
        s = AlignmentState.aligned([3], [1.0], 1.0)
        kicked = perturb(s, 0.1, rng)
        assert phase_spread(kicked)[0] > 0
        np.testing.assert_array_equal(kicked.momenta, s.momenta)


class TestPotentialAndForces:
    def test_potential_vanishes_when_aligned(self):
        assert alignment_potential(AlignmentState.aligned([4, 3], [0.2, 2.0], 5.0)) == 0.0

    def test_potential_of_a_pair(self):
        s = AlignmentState([0, 0], [0.0, 0.7], [0.0, 0.0], 3.0, 1)
        assert alignment_potential(s) == pytest.approx(0.5 * 9.0 * math.sin(0.7) ** 2)

    def test_members_of_different_classes_do_not_interact(self):
        s = AlignmentState([0, 1], [0.0, 0.7], [0.0, 0.0], 3.0, 2)
        assert alignment_potential(s) == 0.0

    def test_force_is_minus_potential_gradient(self, mixed_state):
        s = mixed_state

        def potential(phases):
            return alignment_potential(AlignmentState(s.beables, phases, s.momenta, s.stiffness, s.dim))

        expected = -numerical_gradient(potential, s.phases)
        np.testing.assert_allclose(alignment_force(s.beables, s.phases, s.stiffness, s.dim), expected, atol=1e-7)

    def test_drift_gradient_transpose(self, rng, mixed_state):
        spec = random_spec(3, rng)
        s = mixed_state
        counts = s.counts()

        def weighted_drift(phases):
            return float(s.momenta @ member_drift(s.beables, phases, counts, spec))

        expected = numerical_gradient(weighted_drift, s.phases)
        actual = drift_gradient_transpose(s.beables, s.phases, s.momenta, counts, spec)
        np.testing.assert_allclose(actual, expected, atol=1e-7)

    def test_jacobian_carries_the_member_drift(self, rng, mixed_state):
        spec = random_spec(3, rng)
        s = mixed_state
        jacobian = DriftJacobian(s.beables, s.phases, s.counts(), spec)
        np.testing.assert_allclose(jacobian.drift, member_drift(s.beables, s.phases, s.counts(), spec), atol=1e-12)


class TestStepAlignment:
    def test_rejects_stiff_step(self, single_class):
        s = AlignmentState.aligned([3], [0.0], 10.0)
        with pytest.raises(StepSizeError):
            step_alignment(s, single_class, 0.02)

    def test_step_bound_scales_with_class_size(self, single_class):
        # dt * f = 0.05 is fine for a pair but not for 25 members oscillating at f sqrt(25).
        step_alignment(AlignmentState.aligned([2], [0.0], 10.0), single_class, 0.005)
        with pytest.raises(StepSizeError, match=r"sqrt\(max n\)"):
            step_alignment(AlignmentState.aligned([25], [0.0], 10.0), single_class, 0.005)

    def test_aligned_rest_state_follows_copy_free_drift(self, rng):
        spec = random_spec(3, rng)
        counts = np.array([2, 3, 4])
        start = np.array([0.3, 1.9, 4.0])
        s = AlignmentState.aligned(counts, start, 2.0)
        for _ in range(100):
            s = step_alignment(s, spec, 0.01)

        expected = rk4_integrate(lambda _t, p: class_drift(counts, p, spec), start, 1.0, 1e-3)
        np.testing.assert_allclose(s.phases, expected[s.beables], atol=1e-6)
        assert np.max(np.abs(s.momenta)) < 1e-12
        assert np.max(phase_spread(s)) < 1e-12

    def test_small_oscillations(self, single_class):
        # Linearised frequency f sqrt(n) = 20: after half a period every deviation flips sign.
        s = AlignmentState([0, 0, 0, 0], [0.01, -0.01, 0.005, -0.005], np.zeros(4), 10.0, 1)
        dt = (math.pi / 20) / 160
        for _ in range(160):
            s = step_alignment(s, single_class, dt)

        np.testing.assert_allclose(s.phases, [-0.01, 0.01, -0.005, 0.005], atol=2e-5)

    def test_energy_is_conserved(self, rabi_spec, rng):
        s = perturb(AlignmentState.aligned([5, 5], [0.0, 1.0], 2.0), 0.1, rng)
        result = alignment_run(s, rabi_spec, 0.002, 500, sample_every=50)

        assert result.energy_drift() <= 1e-6
        assert result.times[-1] == pytest.approx(1.0)

    def test_run_sampling(self, rabi_spec):
        s = AlignmentState.aligned([2, 2], [0.0, 1.0], 1.0)
        result = alignment_run(s, rabi_spec, 0.01, 10, sample_every=4)

        np.testing.assert_allclose(result.times, [0.0, 0.04, 0.08, 0.1])
        assert result.spread.shape == (4, 2)
        assert result.final.time == pytest.approx(0.1)

    def test_energy_of_rest_state_is_potential(self, rabi_spec):
        s = AlignmentState([0, 0, 1], [0.0, 0.5, 1.0], np.zeros(3), 2.0, 2)
        assert alignment_energy(s, rabi_spec) == pytest.approx(alignment_potential(s))


class TestQuantumActionDensity:
    @pytest.fixture
    def state(self, rng):
        spec = random_spec(3, rng)
        rho = np.array([0.2, 0.3, 0.5])
        phi = np.array([0.4, 2.0, 5.1])
        derivatives = madelung_rhs(spec)(0.0, np.concatenate([rho, phi]))
        return spec, rho, phi, derivatives[:3], derivatives[3:]

    def test_density_variation_gives_phase_law(self, state):
        spec, rho, phi, _, phi_dot = state
        gradient = numerical_gradient(
            lambda r: quantum_action_density(SimpleNamespace(rho=r, phi=phi), spec, phi_dot), rho
        )
        np.testing.assert_allclose(gradient, 0.0, atol=1e-8)

    def test_phase_variation_gives_population_law(self, state):
        spec, rho, phi, rho_dot, phi_dot = state
        gradient = numerical_gradient(
            lambda p: quantum_action_density(SimpleNamespace(rho=rho, phi=p), spec, phi_dot), phi
        )
        np.testing.assert_allclose(gradient, rho_dot, atol=1e-8)

"""Hamiltonian model whose zero-energy solutions are phase aligned.

Each member carries a momentum pi_I conjugate to its phase, and

    H = sum_I [ pi_I^2 / 2 + pi_I Omega_I(phi, n) ] + (f^2 / 2) sum_{I<J, a_I = a_J} sin^2(phi_I - phi_J)

so that phi_I' = pi_I + Omega_I. With pi = 0 and every class aligned both the
potential force and the pi-weighted drift force vanish: the members then move
exactly as the copy-free ensemble does. Beables are frozen here; there are no
copy events.
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from ensembles.ensemble_core import class_circular_stats, class_reference, member_drift, occupation_weights
from ensembles.exceptions import StepSizeError
from ensembles.integrators import compose, fixed_point
from ensembles.model_spec import DRIFT_EXPONENT

logger = logging.getLogger(__name__)

# Largest step allowed, as a fraction of the stiff period 1 / (f sqrt(max n)).
STIFFNESS_STEP_BOUND = 0.1


@dataclass(frozen=True, eq=False)
class AlignmentState:
    beables: np.ndarray
    phases: np.ndarray
    momenta: np.ndarray
    stiffness: float
    dim: int
    time: float = 0.0

    def __post_init__(self):
        for name, dtype in (("beables", np.int64), ("phases", float), ("momenta", float)):
            array = np.array(getattr(self, name), dtype=dtype).reshape(-1)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if not (self.beables.size == self.phases.size == self.momenta.size):
            raise ValueError("beables, phases and momenta must have one entry per member")
        if not (np.all(np.isfinite(self.phases)) and np.all(np.isfinite(self.momenta))):
            raise ValueError("phases and momenta must be finite")
        if not self.stiffness > 0:
            raise ValueError(f"stiffness must be positive, got {self.stiffness}")

    @classmethod
    def aligned(cls, counts, class_phases, stiffness):
        """Members laid out class by class, each on its class phase, at rest."""
        counts = np.asarray(counts, dtype=np.int64)
        beables = np.repeat(np.arange(counts.size), counts)
        phases = np.asarray(class_phases, dtype=float)[beables]
        return cls(beables, phases, np.zeros(beables.size), stiffness, counts.size)

    @classmethod
    def from_ensemble(cls, e, stiffness):
        return cls(e.beables, e.phases, np.zeros(e.size), stiffness, e.dim)

    @property
    def size(self):
        return self.beables.size

    def counts(self):
        return np.bincount(self.beables, minlength=self.dim)


def _double_angle_sums(beables, deviation, dim):
    cos_sum = np.bincount(beables, weights=np.cos(2.0 * deviation), minlength=dim)
    sin_sum = np.bincount(beables, weights=np.sin(2.0 * deviation), minlength=dim)
    return cos_sum, sin_sum


def alignment_potential(s):
    """(f^2 / 2) sum over intra-class pairs of sin^2(phi_I - phi_J)."""
    deviation = s.phases - class_reference(s.beables, s.phases, s.dim)[s.beables]
    counts = s.counts()
    # sum_{I<J} sin^2(d_I - d_J) = n A - A^2 - B^2 / 4 with A = sum sin^2 d, B = sum sin 2d
    a = np.bincount(s.beables, weights=np.sin(deviation) ** 2, minlength=s.dim)
    _, b = _double_angle_sums(s.beables, deviation, s.dim)
    pairs = counts * a - a**2 - 0.25 * b**2
    return 0.5 * s.stiffness**2 * float(np.sum(pairs))


def alignment_force(beables, phases, stiffness, dim):
    """-dV/dphi_I = -f^2 sum_{J in a_I} sin(phi_I - phi_J) cos(phi_I - phi_J)."""
    deviation = phases - class_reference(beables, phases, dim)[beables]
    cos_sum, sin_sum = _double_angle_sums(beables, deviation, dim)
    twice = 2.0 * deviation
    return -0.5 * stiffness**2 * (np.sin(twice) * cos_sum[beables] - np.cos(twice) * sin_sum[beables])


class DriftJacobian:
    """The member drift Omega at fixed phases, and products with its transposed Jacobian.

    (J^T pi)_I = sum_K pi_K dOmega_K/dphi_I, collapsed over classes. Everything
    that depends on the phases alone is computed once, so repeated products
    cost two class sums each.
    """

    def __init__(self, beables, phases, counts, spec):
        self.beables = beables
        self.coupling = spec.complex_coupling
        self.weight_own = occupation_weights(counts, DRIFT_EXPONENT)
        self.weight_other = occupation_weights(counts, -DRIFT_EXPONENT - 1.0)
        self.rotor = np.exp(1j * phases)
        z = np.bincount(beables, weights=self.rotor.real, minlength=spec.dim) - 1j * np.bincount(
            beables, weights=self.rotor.imag, minlength=spec.dim
        )
        twisted = self.rotor * (self.coupling @ (self.weight_other * z))[beables]
        self.drift = spec.omega[beables] + self.weight_own[beables] * twisted.real
        # dOmega_I/dphi_I
        self.diagonal = -self.weight_own[beables] * twisted.imag

    def transpose_product(self, momenta):
        dim = self.weight_own.size
        # K in class b drives I through R_{b a_I} exp(i delta_{b a_I}).
        w = self.weight_own * (
            np.bincount(self.beables, weights=momenta * self.rotor.real, minlength=dim)
            + 1j * np.bincount(self.beables, weights=momenta * self.rotor.imag, minlength=dim)
        )
        incoming = (self.coupling.T @ w)[self.beables]
        return self.weight_other[self.beables] * np.imag(np.conj(self.rotor) * incoming) + momenta * self.diagonal


def drift_gradient_transpose(beables, phases, momenta, counts, spec):
    """(J^T pi)_I = sum_K pi_K dOmega_K/dphi_I."""
    return DriftJacobian(beables, phases, counts, spec).transpose_product(momenta)


def alignment_energy(s, spec):
    omega = member_drift(s.beables, s.phases, s.counts(), spec)
    kinetic = float(np.sum(0.5 * s.momenta**2 + s.momenta * omega))
    return kinetic + alignment_potential(s)


def stiff_frequency(s):
    """Linearised oscillation frequency f sqrt(max n_a) of the alignment potential."""
    return s.stiffness * math.sqrt(float(np.max(s.counts(), initial=1)))


def step_alignment(s, spec, dt):
    """One fourth-order symmetric step: five-stage composition of a generalized Stormer-Verlet map.

    Each stage is a half kick in pi, a drift in phi and a second half kick.
    The stiff terms (pi in phi' and the alignment force in pi') enter
    explicitly; only the weak drift coupling is solved by fixed-point
    iteration. The map is symplectic and symmetric.
    """
    frequency = stiff_frequency(s)
    if dt * frequency > STIFFNESS_STEP_BOUND:
        raise StepSizeError(
            f"alignment step {dt:g} too large for stiffness {s.stiffness:g} "
            f"(dt * f * sqrt(max n) = {dt * frequency:.3g} must be at most {STIFFNESS_STEP_BOUND})"
        )
    beables, counts = s.beables, s.counts()

    def linearize(phases):
        return DriftJacobian(beables, phases, counts, spec)

    def force(phases):
        return alignment_force(beables, phases, s.stiffness, s.dim)

    def verlet(y, h):
        phases, momenta, kick, jacobian = y
        half = 0.5 * h
        base = momenta + half * kick
        momenta = fixed_point(
            lambda p: base - half * jacobian.transpose_product(p), base - half * jacobian.transpose_product(momenta)
        )
        start = phases + h * momenta + half * jacobian.drift
        phases = fixed_point(
            lambda q: start + half * member_drift(beables, q, counts, spec), start + half * jacobian.drift
        )
        kick, jacobian = force(phases), linearize(phases)
        momenta = momenta + half * (kick - jacobian.transpose_product(momenta))
        return phases, momenta, kick, jacobian

    phases, momenta, _, _ = compose(verlet, (s.phases, s.momenta, force(s.phases), linearize(s.phases)), dt)
    return replace(s, phases=phases, momenta=momenta, time=s.time + dt)


def phase_spread(s):
    """Per-class circular spread sqrt(2 (1 - Rbar)); 0 for empty and singleton classes."""
    return class_circular_stats(s.beables, s.phases, s.dim)[1]


def mean_class_phase(s, a):
    if not np.any(s.beables == a):
        raise ValueError(f"class {a + 1} has no members")
    return float(class_circular_stats(s.beables, s.phases, s.dim)[0][a])


def perturb(s, sigma, rng):
    """Kick every phase by an independent normal deviation of sigma radians."""
    return replace(s, phases=s.phases + rng.normal(0.0, sigma, size=s.size))


@dataclass(frozen=True, eq=False)
class AlignmentRun:
    times: np.ndarray
    energy: np.ndarray
    spread: np.ndarray
    momentum_norm: np.ndarray
    final: AlignmentState

    def energy_drift(self):
        """Largest relative departure of the energy from its initial value."""
        scale = abs(self.energy[0]) or 1.0
        return float(np.max(np.abs(self.energy - self.energy[0]))) / scale


def alignment_run(s, spec, dt, steps, sample_every=1):
    """Integrate steps steps and sample (t, energy, per-class spread, |pi|) every sample_every steps."""
    records = []

    def record(state):
        records.append(
            (state.time, alignment_energy(state, spec), phase_spread(state), float(np.linalg.norm(state.momenta)))
        )

    record(s)
    for k in range(1, steps + 1):
        s = step_alignment(s, spec, dt)
        if k % sample_every == 0 or k == steps:
            record(s)
    times, energy, spread, momentum = zip(*records)
    logger.debug("alignment run: %d steps of %g, final max spread %.3e", steps, dt, float(np.max(spread[-1])))
    return AlignmentRun(np.array(times), np.array(energy), np.array(spread), np.array(momentum), s)


def quantum_action_density(m, spec, phi_dot):
    """Lagrangian of the phase-aligned ensemble, sum_a rho_a (phi_a' - omega_a) - sum_{a != b} sqrt(rho_a rho_b) R_ab cos(...).

    Its variation in phi_a gives the population law and its variation in
    rho_a the phase law of the Madelung equations.
    """
    rho = np.asarray(m.rho)
    phi = np.nan_to_num(np.asarray(m.phi))
    amplitude = np.sqrt(rho)
    angle = phi[:, None] - phi[None, :] + spec.phase_offset
    interaction = np.sum(amplitude[:, None] * amplitude[None, :] * spec.coupling * np.cos(angle))
    return float(np.sum(rho * (np.asarray(phi_dot) - spec.omega)) - interaction)

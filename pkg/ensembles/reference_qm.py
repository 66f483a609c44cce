"""Exact ensemble-level dynamics used as the oracle for the stochastic core.

Two equivalent descriptions of the same pure state are kept:

    QuantumState     amplitudes psi_a
    MadelungState    rho_a = |psi_a|^2 and phi_a with psi_a = sqrt(rho_a) exp(-i phi_a)

The Schrodinger side is propagated exactly through the Hermitian
eigendecomposition; the Madelung side is integrated with RK4 from

    rho_a' = C sum_b sqrt(rho_a rho_b) R_ab sin(phi_a - phi_b + delta_ab)
    phi_a' = omega_a + sum_b sqrt(rho_b / rho_a) R_ab cos(phi_a - phi_b + delta_ab)

which is singular at nodes, so integration refuses to approach one.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ensembles.ensemble_core import Mode, wrap_phases
from ensembles.exceptions import ModeError, NodeProximityError, NonHermitianError, NormalizationError
from ensembles.integrators import rk4_trajectory
from ensembles.model_spec import COPY_RATE_NORMALIZATION, Hamiltonian

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-10

# integrate_madelung stops when any density falls below this value.
NODE_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class QuantumState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)
        drift = abs(self.norm() - 1.0)
        if drift > NORMALIZATION_TOLERANCE:
            raise NormalizationError(f"state norm differs from 1 by {drift:.3e}")

    @classmethod
    def normalized(cls, amplitudes):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amplitudes)
        if norm == 0:
            raise NormalizationError("cannot normalize the zero vector")
        return cls(amplitudes / norm)

    @property
    def dim(self):
        return self.amplitudes.size

    def norm(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class MadelungState:
    rho: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float).reshape(-1)
        phi = np.array(self.phi, dtype=float).reshape(-1)
        if rho.size != phi.size:
            raise ValueError(f"{rho.size} densities but {phi.size} phases")
        if np.any(rho < 0) or not np.all(np.isfinite(rho)):
            raise NormalizationError("densities must be finite and nonnegative")
        drift = abs(float(rho.sum()) - 1.0)
        if drift > NORMALIZATION_TOLERANCE:
            raise NormalizationError(f"densities sum to 1 {drift:+.3e}")
        phi = np.where(rho > 0, phi, np.nan)
        rho.setflags(write=False)
        phi.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "phi", phi)

    @property
    def dim(self):
        return self.rho.size

    def defined(self):
        return self.rho > 0


def ensemble_to_madelung(e):
    if e.mode is not Mode.ALIGNED:
        raise ModeError("only a phase-aligned ensemble defines class phases")
    counts = e.counts()
    return MadelungState(rho=counts / e.size, phi=e.class_phases())


def madelung_to_quantum(m):
    phases = np.nan_to_num(m.phi)
    return QuantumState(np.sqrt(m.rho) * np.exp(-1j * phases))


def quantum_to_madelung(q):
    rho = q.probabilities()
    return MadelungState(rho=rho, phi=wrap_phases(-np.angle(q.amplitudes)))


class Propagator:
    """exp(-i H t / hbar) through one Hermitian eigendecomposition, reusable for any t."""

    def __init__(self, h, hbar=1.0):
        hamiltonian = h if isinstance(h, Hamiltonian) else Hamiltonian(h)
        if not hamiltonian.is_hermitian():
            raise NonHermitianError(
                f"Hamiltonian is not Hermitian (relative error {hamiltonian.hermiticity_error():.3e})"
            )
        matrix = hamiltonian.matrix
        self.energies, self.vectors = linalg.eigh(0.5 * (matrix + matrix.conj().T))
        self.hbar = hbar

    def __call__(self, q, t):
        coefficients = self.vectors.conj().T @ q.amplitudes
        return QuantumState(self.vectors @ (np.exp(-1j * self.energies * t / self.hbar) * coefficients))


def evolve_schrodinger(q, h, t, hbar=1.0):
    return Propagator(h, hbar)(q, t)


def madelung_rhs(spec):
    """Right-hand side of the Madelung equations on y = (rho, phi)."""
    dim = spec.dim

    def rhs(_t, y):
        rho, phi = y[:dim], y[dim:]
        amplitude = np.sqrt(np.maximum(rho, 0.0))
        angle = phi[:, None] - phi[None, :] + spec.phase_offset
        weighted = spec.coupling * amplitude[None, :]
        rho_dot = COPY_RATE_NORMALIZATION * amplitude * np.sum(weighted * np.sin(angle), axis=1)
        phi_dot = spec.omega + np.sum(weighted * np.cos(angle), axis=1) / amplitude
        return np.concatenate([rho_dot, phi_dot])

    return rhs


def _check_nodes(rho, t):
    low = np.flatnonzero(rho < NODE_FLOOR)
    if low.size:
        a = int(low[0])
        raise NodeProximityError(a, t, float(rho[a]))


def madelung_trajectory(m, spec, duration, step):
    """Yield (t, MadelungState) after each RK4 step; raise NodeProximityError near a node."""
    _check_nodes(m.rho, 0.0)
    y0 = np.concatenate([m.rho, m.phi])
    for t, y in rk4_trajectory(madelung_rhs(spec), y0, duration, step):
        rho = y[: spec.dim]
        _check_nodes(rho, t)
        # RK4 keeps sum(rho) exactly up to roundoff; the division only absorbs that roundoff.
        yield t, MadelungState(rho=rho / rho.sum(), phi=wrap_phases(y[spec.dim :]))


def integrate_madelung(m, spec, t, step):
    state = m
    for _, state in madelung_trajectory(m, spec, t, step):
        pass
    logger.debug("integrated Madelung equations over %g with step %g", t, step)
    return state


def observation_probability(m, a):
    if not 0 <= a < m.dim:
        raise IndexError(f"class {a + 1} outside 1..{m.dim}")
    return float(m.rho[a])


def ground_state(h):
    """Lowest eigenvector of h, with its largest component made real and positive."""
    matrix = h.matrix if isinstance(h, Hamiltonian) else np.asarray(h, dtype=complex)
    _, vectors = linalg.eigh(matrix)
    vector = vectors[:, 0]
    pivot = vector[np.argmax(np.abs(vector))]
    return QuantumState.normalized(vector * np.conj(pivot) / abs(pivot))


def admix(state, other, epsilon):
    """Normalized state + epsilon * other: a tiny admixture that fills the nodes of state."""
    return QuantumState.normalized(state.amplitudes + epsilon * other.amplitudes)

"""One-dimensional periodic lattice and its classical (Hamilton-Jacobi) limit.

Sites a = 0..P-1 sit at x = a * spacing and couple to their neighbours with
R = hbar / (2 m spacing^2); the free frequencies carry
V(a) = E_a + hbar^2 / (m spacing^2). With positive R and delta = 0 the induced
Hamiltonian has positive hopping, so everything physical (packets, densities,
phases, residuals) is computed in the staggered gauge psi_a -> (-1)^a psi_a,
where it becomes the standard discretised kinetic energy plus E_a. The gauge
needs an even number of sites and never changes a density.

Phases follow the ensemble convention psi = sqrt(rho) exp(-i phi) and
S = hbar * phi, so the velocity field is -dS/dx / m.
"""

import logging
from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from ensembles.ensemble_core import wrap_phases
from ensembles.exceptions import PacketBoundaryError, SpecValidationError
from ensembles.model_spec import Hamiltonian, ModelSpec, canonical_angle, spec_to_hamiltonian, validate_spec
from ensembles.reference_qm import Propagator, QuantumState

logger = logging.getLogger(__name__)

# Sites whose density is below this fraction of the maximum are left out of residual statistics.
DENSITY_FLOOR = 1e-12

# A packet with more than this much probability within EDGE_FRACTION of either end has reached the boundary.
BOUNDARY_MASS = 1e-6
EDGE_FRACTION = 0.05


class HJConvention(StrEnum):
    # dS/dt = -(dS/dx)^2 / 2m + V (+ V_Q), as printed, on S = hbar * phi.
    PRINTED = "printed"
    # The textbook form on S~ = -S: dS~/dt = -(dS~/dx)^2 / 2m - V + V_Q.
    STANDARD = "standard"


@dataclass(frozen=True, eq=False)
class LatticeModel:
    sites: int
    spacing: float
    mass: float
    onsite_energy: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        energy = np.array(self.onsite_energy, dtype=float).reshape(-1)
        if energy.size == 1 and self.sites > 1:
            energy = np.full(self.sites, energy[0])
        energy.setflags(write=False)
        object.__setattr__(self, "onsite_energy", energy)
        object.__setattr__(self, "sites", int(self.sites))

        if self.sites < 3:
            raise SpecValidationError(f"a periodic lattice needs at least 3 sites, got {self.sites}")
        if self.sites % 2:
            raise SpecValidationError(f"the staggered gauge needs an even number of sites, got {self.sites}")
        for name in ("spacing", "mass", "hbar"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise SpecValidationError(f"{name} must be positive and finite, got {value}")
        if energy.size != self.sites or not np.all(np.isfinite(energy)):
            raise SpecValidationError(f"onsite energy needs {self.sites} finite entries")

    @classmethod
    def free(cls, sites, spacing=1.0, mass=1.0, hbar=1.0):
        return cls(sites, spacing, mass, np.zeros(sites), hbar)

    @classmethod
    def ramp(cls, sites, slope, spacing=1.0, mass=1.0, hbar=1.0):
        """Linear potential E_a = slope * x_a: a constant force -slope."""
        return cls(sites, spacing, mass, slope * spacing * np.arange(sites), hbar)

    @property
    def hopping(self):
        """hbar / (2 m spacing^2), the neighbour coupling rate."""
        return self.hbar / (2.0 * self.mass * self.spacing**2)

    @property
    def positions(self):
        return self.spacing * np.arange(self.sites)

    @property
    def length(self):
        return self.spacing * self.sites

    def potential(self):
        """V(a) = E_a + hbar^2 / (m spacing^2)."""
        return self.onsite_energy + self.hbar**2 / (self.mass * self.spacing**2)


def lattice_to_spec(l):
    neighbours = np.roll(np.eye(l.sites), 1, axis=1) + np.roll(np.eye(l.sites), -1, axis=1)
    spec = ModelSpec(
        dim=l.sites,
        omega=l.potential() / l.hbar,
        coupling=l.hopping * neighbours,
        phase_offset=np.zeros((l.sites, l.sites)),
        hbar=l.hbar,
    )
    return validate_spec(spec)


def staggered_signs(sites):
    return np.where(np.arange(sites) % 2, -1.0, 1.0)


def to_model_gauge(q):
    """Map a physical-gauge state onto the gauge of the induced Hamiltonian (an involution)."""
    return QuantumState(staggered_signs(q.dim) * q.amplitudes)


def physical_hamiltonian(l):
    """The induced Hamiltonian in the staggered gauge: -hbar^2/(2m) times the discrete Laplacian plus E_a."""
    signs = staggered_signs(l.sites)
    matrix = spec_to_hamiltonian(lattice_to_spec(l)).matrix
    return Hamiltonian(signs[:, None] * matrix * signs[None, :])


def gaussian_packet(l, center, width, velocity=0.0):
    """psi(x) ~ exp(-(x - x0)^2 / (4 w^2) + i k0 x) with k0 = m v / hbar, in the physical gauge."""
    x = l.positions
    wavenumber = l.mass * velocity / l.hbar
    amplitudes = np.exp(-((x - center) ** 2) / (4.0 * width**2) + 1j * wavenumber * x)
    return QuantumState.normalized(amplitudes)


def density_and_action(q, l):
    """rho_a and S_a = hbar * phi_a of a physical-gauge state, S unwrapped from the density maximum."""
    rho = q.probabilities()
    phi = wrap_phases(-np.angle(q.amplitudes))
    return rho, l.hbar * unwrap_lattice_phase(phi, rho)


def unwrap_lattice_phase(phi, rho):
    """Unwrap phases along the lattice outwards from the site of highest density."""
    start = int(np.argmax(rho))
    phi = np.asarray(phi, dtype=float)
    right = np.unwrap(phi[start:])
    left = np.unwrap(phi[: start + 1][::-1])[::-1]
    return np.concatenate([left[:-1], right])


def _forward_difference(S, l):
    """(S_{a+1} - S_a) / spacing across every bond, with the phase jump across each bond taken below pi."""
    return l.hbar * canonical_angle((np.roll(S, -1) - S) / l.hbar) / l.spacing


def _central_gradient(S, l):
    forward = _forward_difference(S, l)
    return 0.5 * (forward + np.roll(forward, 1))


def _laplacian_ratio(amplitude, l):
    laplacian = np.roll(amplitude, -1) + np.roll(amplitude, 1) - 2.0 * amplitude
    with np.errstate(divide="ignore", invalid="ignore"):
        return laplacian / (l.spacing**2 * amplitude)


def quantum_potential(rho, l):
    """V_Q = (hbar^2 / 2m) (discrete Laplacian of sqrt(rho)) / sqrt(rho)."""
    rho = np.asarray(rho, dtype=float)
    empty = np.flatnonzero(rho <= 0)
    if empty.size:
        raise ValueError(f"quantum potential undefined at empty site {int(empty[0]) + 1}")
    return l.hbar**2 / (2.0 * l.mass) * _laplacian_ratio(np.sqrt(rho), l)


def continuity_residual(rho, S, rho_next, S_next, dt, l):
    """|d(rho)/dt - (1/m) d/dx(rho dS/dx)| per site, on the density per unit length.

    Both spatial terms use the midpoint of the two snapshots and bond-centred
    fluxes, so the residual measures discretisation error only.
    """
    density = np.asarray(rho) / l.spacing
    density_next = np.asarray(rho_next) / l.spacing
    density_mid = 0.5 * (density + density_next)
    S_mid = np.asarray(S) + 0.5 * _time_difference(S, S_next, l)

    bond_density = 0.5 * (density_mid + np.roll(density_mid, -1))
    flux = bond_density * _forward_difference(S_mid, l)
    divergence = (flux - np.roll(flux, 1)) / l.spacing
    return np.abs((density_next - density) / dt - divergence / l.mass)


def _time_difference(S, S_next, l):
    return l.hbar * canonical_angle((np.asarray(S_next) - np.asarray(S)) / l.hbar)


def hamilton_jacobi_residual(
    rho, S, S_next, dt, l, include_vq=True, convention=HJConvention.STANDARD, rho_next=None
):
    """Residual of the Hamilton-Jacobi equation for one pair of snapshots, per site.

    Sites where the quantum potential is undefined come out as NaN.
    """
    rho_mid = np.asarray(rho) if rho_next is None else 0.5 * (np.asarray(rho) + np.asarray(rho_next))
    S_dot = _time_difference(S, S_next, l) / dt
    S_mid = np.asarray(S) + 0.5 * S_dot * dt
    kinetic = _central_gradient(S_mid, l) ** 2 / (2.0 * l.mass)
    potential = l.onsite_energy
    vq = l.hbar**2 / (2.0 * l.mass) * _laplacian_ratio(np.sqrt(rho_mid), l) if include_vq else 0.0

    match HJConvention(convention):
        case HJConvention.PRINTED:
            return np.abs(S_dot + kinetic - potential - vq)
        case HJConvention.STANDARD:
            # S~ = -S: dS~/dt = -S_dot, and the kinetic term is even in S.
            return np.abs(-S_dot + kinetic + potential - vq)


def kinetic_density(S, l):
    """(dS/dx)^2 / 2m per site, the scale hamilton_jacobi_residual is compared against."""
    return _central_gradient(S, l) ** 2 / (2.0 * l.mass)


def weighted_mean(values, rho):
    """rho-weighted mean over sites above the density floor (and with finite values)."""
    rho = np.asarray(rho, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = (rho >= DENSITY_FLOOR * rho.max()) & np.isfinite(values)
    return float(np.sum(rho[keep] * values[keep]) / np.sum(rho[keep]))


def _check_boundary(rho, l, t):
    edge = max(1, int(EDGE_FRACTION * l.sites))
    mass = float(rho[:edge].sum() + rho[-edge:].sum())
    if mass > BOUNDARY_MASS:
        raise PacketBoundaryError(f"packet carries {mass:.3e} of its probability at the lattice edge at t={t:.6g}")


@dataclass(frozen=True, eq=False)
class PacketTrajectory:
    times: np.ndarray
    mean_position: np.ndarray
    mean_velocity: np.ndarray
    width: np.ndarray


def packet_mean_trajectory(packet, l, duration, sample_interval):
    """Evolve a physical-gauge packet exactly and sample <x>, its time derivative and the packet width."""
    propagator = Propagator(physical_hamiltonian(l), l.hbar)
    count = max(1, int(round(duration / sample_interval)))
    times = np.linspace(0.0, duration, count + 1)
    x = l.positions
    means, widths = [], []
    for t in times:
        rho = propagator(packet, t).probabilities()
        _check_boundary(rho, l, t)
        mean = float(np.sum(x * rho))
        means.append(mean)
        widths.append(float(np.sqrt(np.sum((x - mean) ** 2 * rho))))
    means = np.array(means)
    velocity = np.gradient(means, times) if times.size > 1 else np.zeros(1)
    logger.debug("packet moved from %g to %g over %g", means[0], means[-1], duration)
    return PacketTrajectory(times, means, velocity, np.array(widths))


@dataclass(frozen=True, eq=False)
class ResidualSample:
    time: float
    rho: np.ndarray
    continuity: np.ndarray
    hamilton_jacobi: np.ndarray
    quantum_potential: np.ndarray
    kinetic: np.ndarray


def residual_series(packet, l, duration, dt, include_vq=True, convention=HJConvention.STANDARD):
    """Yield a ResidualSample for every step of length dt along the exact evolution of packet."""
    propagator = Propagator(physical_hamiltonian(l), l.hbar)
    steps = max(1, int(round(duration / dt)))
    rho, S = density_and_action(packet, l)
    for k in range(1, steps + 1):
        state = propagator(packet, k * dt)
        rho_next, S_next = density_and_action(state, l)
        _check_boundary(rho_next, l, k * dt)
        rho_mid = 0.5 * (rho + rho_next)
        yield ResidualSample(
            time=(k - 0.5) * dt,
            rho=rho_mid,
            continuity=continuity_residual(rho, S, rho_next, S_next, dt, l),
            hamilton_jacobi=hamilton_jacobi_residual(
                rho, S, S_next, dt, l, include_vq=include_vq, convention=convention, rho_next=rho_next
            ),
            quantum_potential=l.hbar**2 / (2.0 * l.mass) * _laplacian_ratio(np.sqrt(rho_mid), l),
            kinetic=kinetic_density(S + 0.5 * _time_difference(S, S_next, l), l),
        )
        rho, S = rho_next, S_next

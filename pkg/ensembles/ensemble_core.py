"""The real ensemble and its stochastic copy dynamics.

An ensemble is N members, each carrying a beable value a_I (0-based here,
1-based in every external format) and a phase phi_I in [0, 2 pi). Between copy
events every phase drifts at

    Omega_I = omega_{a_I} + sum_{J != I} R_{a_I a_J} cos(phi_I - phi_J + delta_{a_I a_J}) / sqrt(n_{a_I} n_{a_J})

and member I copies member J, taking over (a_J, phi_J), at rate

    C * R_{a_I a_J} * sin+(phi_J - phi_I + delta_{a_J a_I}) / sqrt(n_{a_I} n_{a_J})

where C is COPY_RATE_NORMALIZATION: the class whose phase leads gains
members. Both sums collapse over beable classes, so drift and bounds cost
O(N P + P^2) rather than O(N^2).

Two steppers are provided: an exact piecewise-deterministic one (RK4 phase
flow between events drawn by thinning against a phase-independent bound) and a
fixed-step tau-leap with snapshot semantics. In aligned mode both work on the
P class phases and never let two members of a class disagree.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import StrEnum
from typing import NamedTuple

import numpy as np

from ensembles.exceptions import ModeError, RateError, StepSizeError
from ensembles.integrators import DenseRk4, rk4_integrate
from ensembles.model_spec import COPY_EXPONENT, COPY_RATE_NORMALIZATION, DRIFT_EXPONENT

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# Tau-leap steps must keep every member's copy probability per step small.
TAU_LEAP_BOUND = 0.1

# Largest intra-class spread (radians) an aligned ensemble tolerates on construction.
ALIGNMENT_TOLERANCE = 1e-10

DEFAULT_PHASE_SUBSTEP = 1e-2


class Mode(StrEnum):
    PER_MEMBER = "per-member"
    ALIGNED = "aligned"


class Stepper(StrEnum):
    EXACT_EVENT = "exact-event"
    TAU_LEAP = "tau-leap"


class MemberState(NamedTuple):
    beable: int
    phase: float


def wrap_phases(phases):
    """Reduce angles into [0, 2 pi)."""
    wrapped = np.mod(np.asarray(phases, dtype=float), TWO_PI)
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)


def class_reference(beables, phases, dim):
    """Phase of the first member of each class (0 for empty classes)."""
    reference = np.zeros(dim)
    classes, first = np.unique(beables, return_index=True)
    reference[classes] = phases[first]
    return reference


def class_circular_stats(beables, phases, dim):
    """Per-class circular mean (NaN when empty) and circular spread sqrt(2 (1 - Rbar)) (0 when empty or singleton).

    The spread agrees with the circular standard deviation sqrt(-2 ln Rbar) to
    leading order in small deviations, and stays finite (sqrt 2) for antipodal
    phases where that one diverges.
    """
    counts = np.bincount(beables, minlength=dim)
    occupied = counts > 0

    # Offsets from each class's first member are exactly 0 for identical
    # phases, and so is everything computed from them below.
    reference = class_reference(beables, phases, dim)
    offset = phases - reference[beables]
    cos_sum = np.bincount(beables, weights=np.cos(offset), minlength=dim)
    sin_sum = np.bincount(beables, weights=np.sin(offset), minlength=dim)
    centre = np.where(occupied, np.arctan2(sin_sum, cos_sum), 0.0)
    mean = np.where(occupied, wrap_phases(reference + centre), np.nan)

    deviation = offset - centre[beables]
    half_chord = np.sin(0.5 * deviation) ** 2
    spread_sq = np.bincount(beables, weights=half_chord, minlength=dim)
    spread = np.where(occupied, 2.0 * np.sqrt(spread_sq / np.maximum(counts, 1)), 0.0)
    return mean, spread


@dataclass(frozen=True)
class OccupationCounts:
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def __eq__(self, other):
        if not isinstance(other, OccupationCounts):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    __hash__ = None

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def dim(self):
        return self.counts.size

    def relative_frequencies(self):
        return self.counts / self.total


@dataclass(frozen=True, eq=False)
class EnsembleState:
    beables: np.ndarray
    phases: np.ndarray
    dim: int
    time: float = 0.0
    mode: Mode = Mode.ALIGNED

    def __post_init__(self):
        beables = np.array(self.beables, dtype=np.int64).reshape(-1)
        phases = wrap_phases(np.array(self.phases, dtype=float).reshape(-1))
        beables.setflags(write=False)
        phases.setflags(write=False)
        object.__setattr__(self, "beables", beables)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "time", float(self.time))

        if beables.size < 1:
            raise ValueError("an ensemble needs at least one member")
        if beables.size != phases.size:
            raise ValueError(f"{beables.size} beables but {phases.size} phases")
        if beables.min() < 0 or beables.max() >= self.dim:
            raise ValueError(f"beable values must lie in 1..{self.dim}")
        if not np.all(np.isfinite(phases)):
            raise ValueError("member phases must be finite")
        if self.mode is Mode.ALIGNED:
            spread = self.class_spread()
            if spread.max() > ALIGNMENT_TOLERANCE:
                a = int(np.argmax(spread))
                raise ModeError(f"aligned ensemble has phase spread {spread[a]:.3e} in class {a + 1}")

    def __str__(self):
        return f"Ensemble of {self.size} ({self.mode}) at t={self.time:g}"

    @property
    def size(self):
        return self.beables.size

    @property
    def members(self):
        return [MemberState(int(a), float(phi)) for a, phi in zip(self.beables, self.phases)]

    def member(self, index):
        return MemberState(int(self.beables[index]), float(self.phases[index]))

    def counts(self):
        return np.bincount(self.beables, minlength=self.dim)

    def class_phases(self):
        """Phase of each class (the shared phase when aligned, the circular mean otherwise); NaN when empty."""
        if self.mode is Mode.ALIGNED:
            phases = np.full(self.dim, np.nan)
            classes, first = np.unique(self.beables, return_index=True)
            phases[classes] = self.phases[first]
            return phases
        return class_circular_stats(self.beables, self.phases, self.dim)[0]

    def class_spread(self):
        return class_circular_stats(self.beables, self.phases, self.dim)[1]

    def evolve(self, **changes):
        return replace(self, **changes)


def occupation_counts(e):
    return OccupationCounts(e.counts())


def occupation_weights(counts, exponent):
    """Per-pair factors n_a**exponent with empty classes mapped to 0."""
    n = np.asarray(counts, dtype=float)
    return np.where(n > 0, np.where(n > 0, n, 1.0) ** exponent, 0.0)


def member_drift(beables, phases, counts, spec):
    """Angular velocity of every member, summed class by class."""
    weight_own = occupation_weights(counts, DRIFT_EXPONENT)
    weight_other = occupation_weights(counts, -DRIFT_EXPONENT - 1.0)
    # Z_b = sum_{J in b} exp(-i phi_J), scaled by the partner weight of class b.
    z = np.bincount(beables, weights=np.cos(phases), minlength=spec.dim) - 1j * np.bincount(
        beables, weights=np.sin(phases), minlength=spec.dim
    )
    field_ = spec.complex_coupling @ (weight_other * z)
    return spec.omega[beables] + weight_own[beables] * np.real(np.exp(1j * phases) * field_[beables])


def class_drift(counts, class_phases, spec):
    """Aligned-mode drift of each occupied class: omega_a + sum_b (n_a/n_b)^r R_ab cos(phi_a - phi_b + delta_ab).

    Empty classes have no members to drift and get 0.
    """
    occupied = np.asarray(counts) > 0
    phases = np.where(occupied, class_phases, 0.0)
    weight_own = occupation_weights(counts, DRIFT_EXPONENT)
    weight_other = occupation_weights(counts, -DRIFT_EXPONENT)
    z = weight_other * np.exp(-1j * phases)
    field_ = spec.complex_coupling @ z
    drift = spec.omega + weight_own * np.real(np.exp(1j * phases) * field_)
    return np.where(occupied, drift, 0.0)


def phase_drift(e, I, spec):
    """Omega_I for one member."""
    return float(member_drift(e.beables, e.phases, e.counts(), spec)[I])


def copy_rate(e, I, J, spec):
    """Rate at which member I copies member J (I takes over J's beable and phase)."""
    if I == J:
        raise ValueError("a member cannot copy itself")
    counts = e.counts()
    lose, gain = int(e.beables[I]), int(e.beables[J])
    pair = (counts[gain] ** (COPY_EXPONENT - 1.0)) * (counts[lose] ** (-COPY_EXPONENT))
    angle = e.phases[J] - e.phases[I] + spec.phase_offset[gain, lose]
    return float(COPY_RATE_NORMALIZATION * spec.coupling[gain, lose] * pair * max(0.0, math.sin(angle)))


def copy_rate_matrix(beables, phases, counts, spec):
    """rates[I, J] = copy_rate for every ordered pair, from one snapshot. O(N^2)."""
    gain_weight = occupation_weights(counts, COPY_EXPONENT - 1.0)
    lose_weight = occupation_weights(counts, -COPY_EXPONENT)
    coupling = spec.coupling[beables[None, :], beables[:, None]]
    offset = spec.phase_offset[beables[None, :], beables[:, None]]
    angle = phases[None, :] - phases[:, None] + offset
    rates = (
        COPY_RATE_NORMALIZATION
        * coupling
        * gain_weight[beables][None, :]
        * lose_weight[beables][:, None]
        * np.maximum(0.0, np.sin(angle))
    )
    np.fill_diagonal(rates, 0.0)
    return rates


def flow_bound_matrix(counts, spec):
    """bound[a, b] = C * n_a^q * n_b^(1-q) * R_ab: the b -> a flow with sin+ replaced by 1."""
    gain = occupation_weights(counts, COPY_EXPONENT)
    lose = occupation_weights(counts, 1.0 - COPY_EXPONENT)
    return COPY_RATE_NORMALIZATION * spec.coupling * gain[:, None] * lose[None, :]


def class_flow_matrix(counts, class_phases, spec):
    """flow[a, b] = total rate at which class-b members become class-a members (aligned ensembles)."""
    occupied = np.asarray(counts) > 0
    phases = np.where(occupied, class_phases, 0.0)
    angle = phases[:, None] - phases[None, :] + spec.phase_offset
    return flow_bound_matrix(counts, spec) * np.maximum(0.0, np.sin(angle))


def aggregate_class_rate(counts, phases, spec, a, b):
    """Total b -> a copy flow C sqrt(n_a n_b) R_ab sin+(phi_a - phi_b + delta_ab) under phase alignment."""
    counts = counts.counts if isinstance(counts, OccupationCounts) else np.asarray(counts)
    if counts[a] == 0 or counts[b] == 0:
        return 0.0
    return float(class_flow_matrix(counts, np.asarray(phases, dtype=float), spec)[a, b])


def ensemble_class_flows(e, spec):
    if e.mode is not Mode.ALIGNED:
        raise ModeError("class-aggregated rates need a phase-aligned ensemble")
    return class_flow_matrix(e.counts(), e.class_phases(), spec)


class _ClassPools:
    """Member indices grouped by beable class, with O(1) uniform draws and moves."""

    def __init__(self, beables, dim):
        self.pools = [list(np.flatnonzero(beables == a)) for a in range(dim)]

    def draw(self, a, rng):
        """Return (position, member) drawn uniformly from class a."""
        position = int(rng.integers(len(self.pools[a])))
        return position, self.pools[a][position]

    def move(self, position, source, target):
        pool = self.pools[source]
        member = pool[position]
        pool[position] = pool[-1]
        pool.pop()
        self.pools[target].append(member)


def step_exact_event(e, spec, horizon, rng, phase_substep=DEFAULT_PHASE_SUBSTEP):
    """Advance by horizon with exact copy events drawn by thinning.

    Between events the phases follow the drift ODE: RK4 on a grid of
    phase_substep restarted at every accepted event, read off at proposal
    times by Hermite interpolation. Candidate events arrive at the
    phase-independent bound Lambda = sum_ab C sqrt(n_a n_b) R_ab, pick a class
    pair in proportion to its bound and a member of each class uniformly, and
    are accepted with probability sin+ of the pair's phase difference.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    aligned = e.mode is Mode.ALIGNED
    beables = e.beables.copy()
    counts = np.bincount(beables, minlength=spec.dim)
    pools = _ClassPools(beables, spec.dim)

    def rhs(_t, phases):
        if aligned:
            return class_drift(counts, phases, spec)
        return member_drift(beables, phases, counts, spec)

    flow = DenseRk4(rhs, phase_substep)
    flow.restart(e.time, np.nan_to_num(e.class_phases()) if aligned else e.phases)

    t, t_end = e.time, e.time + horizon
    proposals = accepted = 0
    bound = flow_bound_matrix(counts, spec)
    cumulative = np.cumsum(bound, axis=None)
    while True:
        total = float(cumulative[-1])
        if not math.isfinite(total):
            raise RateError(f"copy-rate bound is not finite at t={t:.6g}")
        wait = rng.exponential(1.0 / total) if total > 0 else math.inf
        if t + wait >= t_end:
            break
        t += wait
        proposals += 1

        flat = int(np.searchsorted(cumulative, rng.random() * total, side="right"))
        gain, lose = divmod(min(flat, bound.size - 1), spec.dim)
        position, copier = pools.draw(lose, rng)
        _, source = pools.draw(gain, rng)
        y = flow(t)
        if aligned:
            angle = y[gain] - y[lose] + spec.phase_offset[gain, lose]
        else:
            angle = y[source] - y[copier] + spec.phase_offset[gain, lose]
        if rng.random() >= max(0.0, math.sin(angle)):
            continue

        accepted += 1
        if not aligned:
            y[copier] = y[source]
        beables[copier] = gain
        pools.move(position, lose, gain)
        counts[lose] -= 1
        counts[gain] += 1
        bound = flow_bound_matrix(counts, spec)
        cumulative = np.cumsum(bound, axis=None)
        flow.restart(t, wrap_phases(y))

    y = wrap_phases(flow(t_end))
    logger.debug(
        "exact-event step to t=%g: %d proposals, %d accepted, %d RK4 steps",
        t_end,
        proposals,
        accepted,
        flow.steps_taken,
    )
    phases = y[beables] if aligned else y
    return EnsembleState(beables, phases, spec.dim, time=t_end, mode=e.mode)


def step_tau_leap(e, spec, dt, rng, phase_substep=None):
    """One synchronous tau-leap step of length dt.

    Every member copies at most once, with probability 1 - exp(-dt lambda_I)
    and a source drawn in proportion to its pair rate; all rates, counts and
    source states come from the pre-step snapshot. Phases then advance by one
    ODE step under the post-copy occupation.
    """
    if dt <= 0:
        raise StepSizeError("tau-leap step must be positive")
    phase_substep = phase_substep or dt
    aligned = e.mode is Mode.ALIGNED
    counts = e.counts()
    new_beables = e.beables.copy()

    if aligned:
        class_phases = np.nan_to_num(e.class_phases())
        flow = class_flow_matrix(counts, class_phases, spec)
        outgoing = flow.sum(axis=0)
        per_member = np.where(counts > 0, outgoing / np.maximum(counts, 1), 0.0)
        _check_leap(per_member, dt)
        for lose in np.flatnonzero(outgoing > 0):
            switching = rng.binomial(counts[lose], -math.expm1(-dt * per_member[lose]))
            if switching == 0:
                continue
            targets = rng.multinomial(switching, flow[:, lose] / outgoing[lose])
            chosen = rng.choice(np.flatnonzero(e.beables == lose), size=switching, replace=False)
            new_beables[chosen] = np.repeat(np.arange(spec.dim), targets)
        new_counts = np.bincount(new_beables, minlength=spec.dim)
        y = wrap_phases(
            rk4_integrate(lambda _t, p: class_drift(new_counts, p, spec), class_phases, dt, phase_substep, e.time)
        )
        phases = y[new_beables]
    else:
        rates = copy_rate_matrix(e.beables, e.phases, counts, spec)
        totals = rates.sum(axis=1)
        _check_leap(totals, dt)
        copying = np.flatnonzero(rng.random(e.size) < -np.expm1(-dt * totals))
        new_phases = e.phases.copy()
        if copying.size:
            cumulative = np.cumsum(rates[copying], axis=1)
            draws = rng.random(copying.size) * totals[copying]
            sources = np.minimum((cumulative <= draws[:, None]).sum(axis=1), e.size - 1)
            new_beables[copying] = e.beables[sources]
            new_phases[copying] = e.phases[sources]
        new_counts = np.bincount(new_beables, minlength=spec.dim)
        phases = wrap_phases(
            rk4_integrate(
                lambda _t, p: member_drift(new_beables, p, new_counts, spec), new_phases, dt, phase_substep, e.time
            )
        )

    return EnsembleState(new_beables, phases, spec.dim, time=e.time + dt, mode=e.mode)


def _check_leap(per_member_rates, dt):
    if not np.all(np.isfinite(per_member_rates)):
        raise RateError("copy rates are not finite")
    worst = float(np.max(per_member_rates, initial=0.0)) * dt
    if worst > TAU_LEAP_BOUND:
        raise StepSizeError(
            f"tau-leap step {dt:g} too large: dt * max outgoing rate = {worst:.3g} > {TAU_LEAP_BOUND}"
        )


@dataclass(frozen=True)
class StepSchedule:
    stepper: Stepper
    duration: float
    tau: float | None = None
    phase_substep: float = DEFAULT_PHASE_SUBSTEP
    sample_times: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "stepper", Stepper(self.stepper))
        object.__setattr__(self, "sample_times", tuple(float(t) for t in self.sample_times))
        if self.duration < 0:
            raise StepSizeError("duration must be nonnegative")
        if self.phase_substep <= 0:
            raise StepSizeError("phase substep must be positive")
        if self.stepper is Stepper.TAU_LEAP and (self.tau is None or self.tau <= 0):
            raise StepSizeError("tau-leap schedules need a positive tau")
        times = np.asarray(self.sample_times)
        if np.any(np.diff(times) < 0):
            raise StepSizeError("sample times must be nondecreasing")
        if times.size and (times[0] < 0 or times[-1] > self.duration + 1e-12):
            raise StepSizeError(f"sample times must lie within [0, {self.duration:g}]")

    @classmethod
    def regular(cls, stepper, duration, sample_interval, **kwargs):
        count = int(math.floor(duration / sample_interval + 1e-9)) if sample_interval > 0 else 0
        times = [k * sample_interval for k in range(1, count + 1)]
        if duration > 0 and (not times or times[-1] < duration - 1e-12):
            times.append(duration)
        return cls(stepper=stepper, duration=duration, sample_times=times, **kwargs)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    counts: np.ndarray
    class_phases: np.ndarray
    class_spread: np.ndarray
    mode: Mode = Mode.ALIGNED
    metadata: dict = field(default_factory=dict)

    @property
    def size(self):
        return int(self.counts[0].sum())

    @property
    def dim(self):
        return self.counts.shape[1]

    def relative_frequencies(self):
        return self.counts / self.counts.sum(axis=1, keepdims=True)


def _sample(e):
    mean, spread = class_circular_stats(e.beables, e.phases, e.dim)
    phases = e.class_phases() if e.mode is Mode.ALIGNED else mean
    return e.time, e.counts(), phases, spread


def run(e, spec, schedule, rng):
    """Evolve e under schedule and sample counts, class phases and spreads.

    The initial state is always the first sample; later samples are taken at
    schedule.sample_times (measured from e.time).
    """
    start = e.time
    samples = [_sample(e)]
    for offset in schedule.sample_times:
        if offset <= 0:
            continue
        target = start + offset
        if schedule.stepper is Stepper.EXACT_EVENT:
            e = step_exact_event(e, spec, max(0.0, target - e.time), rng, schedule.phase_substep)
        else:
            while target - e.time > 1e-12:
                dt = min(schedule.tau, target - e.time)
                e = step_tau_leap(e, spec, dt, rng, min(schedule.phase_substep, dt))
            e = e.evolve(time=target)
        samples.append(_sample(e))
        logger.debug("sampled t=%g counts=%s", e.time, samples[-1][1])

    times, counts, phases, spreads = zip(*samples)
    return Trajectory(
        times=np.array(times) - start,
        counts=np.array(counts, dtype=np.int64),
        class_phases=np.array(phases),
        class_spread=np.array(spreads),
        mode=e.mode,
    )


def add_spectators(e, spectators):
    """Append spectators per class, carrying the class phase (0 for empty classes)."""
    per_class = np.broadcast_to(np.asarray(spectators, dtype=np.int64), (e.dim,))
    if np.any(per_class < 0):
        raise ValueError("spectator counts must be nonnegative")
    if not per_class.any():
        return e
    class_phases = np.nan_to_num(e.class_phases())
    extra = np.repeat(np.arange(e.dim), per_class)
    return e.evolve(
        beables=np.concatenate([e.beables, extra]),
        phases=np.concatenate([e.phases, class_phases[extra]]),
    )


def sample_ensemble(rho, phi, size, rng, mode=Mode.ALIGNED, phase_jitter=0.0):
    """Draw N members with multinomial occupation from rho; members of a class share phi_a.

    Per-member ensembles may jitter each member's phase by a normal deviation
    of phase_jitter radians. Undefined phases (NaN) become 0.
    """
    rho = np.asarray(rho, dtype=float)
    counts = rng.multinomial(size, rho / rho.sum())
    beables = np.repeat(np.arange(rho.size), counts)
    phases = np.nan_to_num(np.asarray(phi, dtype=float))[beables]
    mode = Mode(mode)
    if phase_jitter and mode is Mode.PER_MEMBER:
        phases = phases + rng.normal(0.0, phase_jitter, size=beables.size)
    return EnsembleState(beables, phases, rho.size, mode=mode)

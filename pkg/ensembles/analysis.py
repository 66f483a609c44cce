"""Comparisons between stochastic ensembles and the exact references.

Seeds are independent tasks: each (seed, N) pair owns a generator derived from
a SeedSequence, tasks may run in a process pool, and results are always
reduced in seed order, so the worker count never changes a number.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ensembles.ensemble_core import Stepper, StepSchedule, add_spectators, run, sample_ensemble
from ensembles.exceptions import NormalizationError
from ensembles.model_spec import spec_to_hamiltonian, time_reverse_spec
from ensembles.reference_qm import MadelungState, Propagator, integrate_madelung, madelung_to_quantum

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-9

# Gate for stepper comparisons, in standard errors of the difference of means.
COMPARISON_SIGMAS = 3.0


def seeded_generator(seed, *key):
    """Independent numpy generator for (seed, key...), stable across processes and worker counts."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def total_variation(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    for name, dist in (("p", p), ("q", q)):
        if abs(dist.sum() - 1.0) > NORMALIZATION_TOLERANCE or np.any(dist < 0):
            raise NormalizationError(f"{name} is not a probability distribution (sum {dist.sum():.12g})")
    return 0.5 * float(np.sum(np.abs(p - q)))


def reference_densities(spec, m, times):
    """|psi_a(t)|^2 from exact Schrodinger evolution of m at each time."""
    propagator = Propagator(spec_to_hamiltonian(spec), spec.hbar)
    q = madelung_to_quantum(m)
    return np.array([propagator(q, t).probabilities() for t in times])


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    times: np.ndarray
    total_variation: np.ndarray
    max_deviation: np.ndarray
    seeds: int
    size: int
    metadata: dict = field(default_factory=dict)

    @property
    def mean_total_variation(self):
        return float(np.mean(self.total_variation))

    @property
    def max_total_variation(self):
        return float(np.max(self.total_variation))

    def rows(self):
        for t, tv, deviation in zip(self.times, self.total_variation, self.max_deviation):
            yield float(t), "total_variation", float(tv)
            yield float(t), "max_deviation", float(deviation)

    def summary(self):
        return {
            "N": self.size,
            "seeds": self.seeds,
            "mean_total_variation": self.mean_total_variation,
            "max_total_variation": self.max_total_variation,
            "max_deviation": float(np.max(self.max_deviation)),
            **self.metadata,
        }


def compare_to_reference(trajectories, reference):
    """Seed-averaged TV and largest class deviation between trajectories and reference densities."""
    frequencies = np.array([trajectory.relative_frequencies() for trajectory in trajectories])
    tv = 0.5 * np.abs(frequencies - reference[None]).sum(axis=2)
    deviation = np.abs(frequencies - reference[None]).max(axis=2)
    return ComparisonReport(
        times=trajectories[0].times,
        total_variation=tv.mean(axis=0),
        max_deviation=deviation.mean(axis=0),
        seeds=len(trajectories),
        size=trajectories[0].size,
    )


def _simulate_task(task):
    spec, m, size, seed, schedule, spectators = task
    rng = seeded_generator(seed, size)
    e = sample_ensemble(m.rho, m.phi, size, rng)
    if spectators:
        e = add_spectators(e, spectators)
    return run(e, spec, schedule, rng)


def simulate_seeds(spec, m, size, seeds, schedule, spectators=0, workers=1):
    """One trajectory per seed, in seed order."""
    tasks = [(spec, m, size, seed, schedule, spectators) for seed in seeds]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(_simulate_task, tasks))
    return [_simulate_task(task) for task in tasks]


@dataclass(frozen=True, eq=False)
class ConvergenceStudy:
    sizes: np.ndarray
    mean_total_variation: np.ndarray
    standard_error: np.ndarray
    slope: float
    reports: list

    def rows(self):
        for size, tv, error in zip(self.sizes, self.mean_total_variation, self.standard_error):
            yield int(size), "mean_total_variation", float(tv)
            yield int(size), "standard_error", float(error)

    def summary(self):
        return {
            "ladder": [int(n) for n in self.sizes],
            "mean_total_variation": [float(tv) for tv in self.mean_total_variation],
            "standard_error": [float(error) for error in self.standard_error],
            "slope": self.slope,
        }


def convergence_study(spec, m, ladder, seeds, schedule, spectators=0, workers=1):
    """Time-averaged TV against the exact reference for each N, and the log-log slope of TV against N."""
    reports, means, errors = [], [], []
    for size in ladder:
        trajectories = simulate_seeds(spec, m, size, seeds, schedule, spectators, workers)
        reference = reference_densities(spec, m, trajectories[0].times)
        report = compare_to_reference(trajectories, reference)
        per_seed = [
            np.mean(0.5 * np.abs(trajectory.relative_frequencies() - reference).sum(axis=1))
            for trajectory in trajectories
        ]
        reports.append(report)
        means.append(float(np.mean(per_seed)))
        errors.append(float(np.std(per_seed, ddof=1) / math.sqrt(len(per_seed))) if len(per_seed) > 1 else 0.0)
        logger.info("N=%d: mean time-averaged TV %.4g over %d seeds", size, means[-1], len(per_seed))

    sizes = np.asarray(ladder)
    slope = float(np.polyfit(np.log(sizes), np.log(means), 1)[0]) if sizes.size > 1 else math.nan
    return ConvergenceStudy(sizes, np.array(means), np.array(errors), slope, reports)


@dataclass(frozen=True)
class NodeEpisode:
    class_index: int
    first_empty: float
    dwell: float


def node_report(trajectory):
    """Every run of sampled counts that are exactly zero, per class, in class then time order."""
    episodes = []
    times = trajectory.times
    for a in range(trajectory.dim):
        empty = trajectory.counts[:, a] == 0
        k = 0
        while k < empty.size:
            if not empty[k]:
                k += 1
                continue
            start = k
            while k < empty.size and empty[k]:
                k += 1
            end = times[k] if k < empty.size else times[-1]
            episodes.append(NodeEpisode(a, float(times[start]), float(end - times[start])))
    return episodes


def time_reversal_check(spec, m, t, step=1e-3):
    """Integrate forward, reverse phases and offsets, integrate again; return the distance to the start."""
    forward = integrate_madelung(m, spec, t, step)
    reversed_start = MadelungState(forward.rho, -forward.phi)
    back = integrate_madelung(reversed_start, time_reverse_spec(spec), t, step)
    rho_error = float(np.max(np.abs(back.rho - m.rho)))
    phase_error = float(np.max(np.abs(np.angle(np.exp(1j * (-back.phi - m.phi))))))
    return rho_error + phase_error


@dataclass(frozen=True, eq=False)
class MixingProfile:
    times: np.ndarray
    mean_spread: np.ndarray
    decay_time: float | None


def mixing_profile(trajectory):
    """Count-weighted mean intra-class spread over time, and when it first falls to 1/e of its start."""
    counts = trajectory.counts.astype(float)
    weights = counts / counts.sum(axis=1, keepdims=True)
    mean_spread = np.sum(weights * trajectory.class_spread, axis=1)
    decay_time = None
    if mean_spread[0] > 0:
        below = np.flatnonzero(mean_spread <= mean_spread[0] / math.e)
        if below.size:
            decay_time = float(trajectory.times[below[0]])
    return MixingProfile(trajectory.times, mean_spread, decay_time)


@dataclass(frozen=True, eq=False)
class StepperComparison:
    exact_counts: np.ndarray
    leap_counts: np.ndarray
    z_scores: np.ndarray
    ks_statistic: np.ndarray
    ks_pvalue: np.ndarray

    @property
    def passed(self):
        return bool(np.all(np.abs(self.z_scores) <= COMPARISON_SIGMAS))

    def summary(self):
        return {
            "seeds": int(self.exact_counts.shape[0]),
            "exact_mean": self.exact_counts.mean(axis=0).tolist(),
            "leap_mean": self.leap_counts.mean(axis=0).tolist(),
            "z_scores": self.z_scores.tolist(),
            "ks_statistic": self.ks_statistic.tolist(),
            "ks_pvalue": self.ks_pvalue.tolist(),
            "passed": self.passed,
        }


def compare_steppers(spec, e, duration, tau, seeds, phase_substep=None):
    """Final occupation counts from exact-event and tau-leap runs over the same seeds, compared class by class."""
    substep = phase_substep or tau
    exact_schedule = StepSchedule(Stepper.EXACT_EVENT, duration, phase_substep=substep, sample_times=(duration,))
    leap_schedule = StepSchedule(
        Stepper.TAU_LEAP, duration, tau=tau, phase_substep=substep, sample_times=(duration,)
    )
    exact = np.array([run(e, spec, exact_schedule, seeded_generator(seed, 0)).counts[-1] for seed in seeds])
    leap = np.array([run(e, spec, leap_schedule, seeded_generator(seed, 1)).counts[-1] for seed in seeds])

    count = len(seeds)
    error = np.sqrt(exact.var(axis=0, ddof=1) / count + leap.var(axis=0, ddof=1) / count)
    difference = exact.mean(axis=0) - leap.mean(axis=0)
    z = np.divide(difference, error, out=np.where(difference == 0, 0.0, np.inf), where=error > 0)
    ks = [stats.ks_2samp(exact[:, a], leap[:, a]) for a in range(spec.dim)]
    return StepperComparison(
        exact_counts=exact,
        leap_counts=leap,
        z_scores=z,
        ks_statistic=np.array([result.statistic for result in ks]),
        ks_pvalue=np.array([result.pvalue for result in ks]),
    )

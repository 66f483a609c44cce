"""JSON codecs for the domain types and CSV writers for every report.

External formats label beables 1..P; arrays inside the package use 0..P-1.
Undefined phases are written as JSON null and CSV nan.
"""

import csv
import json
import math
from pathlib import Path

import numpy as np

from ensembles.classical_limit import LatticeModel
from ensembles.ensemble_core import EnsembleState, Mode, StepSchedule
from ensembles.exceptions import ConfigurationError
from ensembles.model_spec import ModelSpec, validate_spec
from ensembles.reference_qm import MadelungState, QuantumState

DEFAULT_FLOAT_FORMAT = ".17g"


def load_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def dump_json(data, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")


def require(section, key, name="config"):
    try:
        return section[key]
    except (KeyError, TypeError):
        raise ConfigurationError(f"{name} is missing '{key}'") from None


def _optional_float(value):
    return math.nan if value is None else float(value)


def _nullable(values):
    return [None if not math.isfinite(v) else float(v) for v in values]


def spec_from_dict(data):
    omega = np.asarray(require(data, "omega", "model"), dtype=float)
    dim = int(data.get("dim", omega.size))
    if dim != omega.size:
        raise ConfigurationError(f"model declares dim {dim} but has {omega.size} frequencies")
    delta = data.get("delta")
    spec = ModelSpec(
        dim=dim,
        omega=omega,
        coupling=np.asarray(require(data, "R", "model"), dtype=float),
        phase_offset=np.zeros((dim, dim)) if delta is None else np.asarray(delta, dtype=float),
        hbar=float(data.get("hbar", 1.0)),
    )
    return validate_spec(spec)


def spec_to_dict(spec):
    return {
        "dim": spec.dim,
        "hbar": spec.hbar,
        "omega": spec.omega.tolist(),
        "R": spec.coupling.tolist(),
        "delta": spec.phase_offset.tolist(),
    }


def ensemble_from_dict(data, dim):
    members = require(data, "members", "ensemble")
    try:
        beables = [int(member["a"]) - 1 for member in members]
        phases = [float(member.get("phi", 0.0)) for member in members]
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigurationError(f"malformed ensemble member ({e})") from None
    return EnsembleState(
        beables, phases, dim, time=float(data.get("t", 0.0)), mode=Mode(data.get("mode", Mode.ALIGNED))
    )


def ensemble_to_dict(e):
    return {
        "mode": str(e.mode),
        "t": e.time,
        "members": [{"a": member.beable + 1, "phi": member.phase} for member in e.members],
    }


def madelung_from_dict(data):
    rho = np.asarray(require(data, "rho", "state"), dtype=float)
    phi = np.array([_optional_float(v) for v in data.get("phi", [0.0] * rho.size)])
    return MadelungState(rho=rho / rho.sum(), phi=phi)


def madelung_to_dict(m):
    return {"rho": m.rho.tolist(), "phi": _nullable(m.phi)}


def quantum_from_dict(data):
    pairs = np.asarray(require(data, "amplitudes", "state"), dtype=float).reshape(-1, 2)
    return QuantumState(pairs[:, 0] + 1j * pairs[:, 1])


def quantum_to_dict(q):
    return {"amplitudes": [[float(z.real), float(z.imag)] for z in q.amplitudes]}


def lattice_from_dict(data):
    sites = int(require(data, "sites", "lattice"))
    return LatticeModel(
        sites=sites,
        spacing=float(data.get("spacing", 1.0)),
        mass=float(data.get("mass", 1.0)),
        onsite_energy=np.asarray(data.get("E", [0.0]), dtype=float),
        hbar=float(data.get("hbar", 1.0)),
    )


def lattice_to_dict(l):
    return {
        "sites": l.sites,
        "spacing": l.spacing,
        "mass": l.mass,
        "E": l.onsite_energy.tolist(),
        "hbar": l.hbar,
    }


def schedule_from_dict(data):
    duration = float(require(data, "duration", "schedule"))
    options = {
        "tau": data.get("tau"),
        "phase_substep": float(data.get("phase_substep", 1e-2)),
    }
    stepper = data.get("stepper", "exact-event")
    if "sample_times" in data:
        return StepSchedule(stepper, duration, sample_times=data["sample_times"], **options)
    interval = float(data.get("sample_interval", duration))
    return StepSchedule.regular(stepper, duration, interval, **options)


def schedule_to_dict(schedule):
    return {
        "stepper": str(schedule.stepper),
        "duration": schedule.duration,
        "tau": schedule.tau,
        "phase_substep": schedule.phase_substep,
        "sample_times": list(schedule.sample_times),
    }


class CsvReport:
    """LF-terminated UTF-8 CSV with a header row and uniformly formatted floats."""

    def __init__(self, path, header, float_format=DEFAULT_FLOAT_FORMAT):
        self.path = Path(path)
        self.header = header
        self.float_format = float_format

    def _cell(self, value):
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            return str(int(value))
        if isinstance(value, (float, np.floating)):
            return "nan" if math.isnan(value) else format(float(value), self.float_format)
        return str(value)

    def write(self, rows):
        with open(self.path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(self.header)
            for row in rows:
                writer.writerow([self._cell(value) for value in row])
        return self.path


def class_columns(prefix, dim):
    return [f"{prefix}_{a}" for a in range(1, dim + 1)]


def write_trajectory_csv(path, trajectory, float_format=DEFAULT_FLOAT_FORMAT, include_spread=False):
    header = ["t", *class_columns("n", trajectory.dim), *class_columns("phi", trajectory.dim)]
    if include_spread:
        header += class_columns("spread", trajectory.dim)

    def rows():
        for k, t in enumerate(trajectory.times):
            row = [float(t), *trajectory.counts[k], *trajectory.class_phases[k]]
            if include_spread:
                row += list(trajectory.class_spread[k])
            yield row

    return CsvReport(path, header, float_format).write(rows())


def write_madelung_csv(path, samples, dim, float_format=DEFAULT_FLOAT_FORMAT):
    """samples: iterable of (t, MadelungState)."""
    header = ["t", *class_columns("rho", dim), *class_columns("phi", dim)]
    rows = ([float(t), *m.rho, *m.phi] for t, m in samples)
    return CsvReport(path, header, float_format).write(rows)


def write_metric_csv(path, rows, float_format=DEFAULT_FLOAT_FORMAT, key="t"):
    return CsvReport(path, [key, "metric", "value"], float_format).write(rows)


def write_alignment_csv(path, alignment, float_format=DEFAULT_FLOAT_FORMAT):
    dim = alignment.spread.shape[1]
    header = ["t", "energy", *class_columns("spread", dim), "pi_norm"]
    rows = (
        [float(t), float(energy), *spread, float(norm)]
        for t, energy, spread, norm in zip(alignment.times, alignment.energy, alignment.spread, alignment.momentum_norm)
    )
    return CsvReport(path, header, float_format).write(rows)


def write_residual_csv(path, samples, float_format=DEFAULT_FLOAT_FORMAT):
    """One row per (time, site) from an iterable of ResidualSample."""

    def rows():
        for sample in samples:
            for a in range(sample.rho.size):
                yield [
                    float(sample.time),
                    a + 1,
                    float(sample.continuity[a]),
                    float(sample.hamilton_jacobi[a]),
                    float(sample.quantum_potential[a]),
                ]

    return CsvReport(path, ["t", "site", "continuity", "hj", "vq"], float_format).write(rows())


def write_packet_csv(path, packet, float_format=DEFAULT_FLOAT_FORMAT):
    rows = zip(
        map(float, packet.times),
        map(float, packet.mean_position),
        map(float, packet.mean_velocity),
        map(float, packet.width),
    )
    return CsvReport(path, ["t", "mean_x", "mean_v", "width"], float_format).write(rows)

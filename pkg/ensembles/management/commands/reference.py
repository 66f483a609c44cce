import numpy as np

from ensembles.management.base import ExperimentCommand
from ensembles.model_spec import spec_to_hamiltonian
from ensembles.reference_qm import Propagator, madelung_to_quantum, quantum_to_madelung
from ensembles.serialization import (
    madelung_from_dict,
    quantum_from_dict,
    quantum_to_dict,
    require,
    spec_from_dict,
    write_madelung_csv,
)


class Command(ExperimentCommand):
    help = "Propagate the Schrodinger equation of the induced Hamiltonian exactly"
    name = "reference"

    def run_experiment(self, config, options):
        spec = spec_from_dict(require(config, "model"))
        state = require(config, "state")
        q = quantum_from_dict(state) if "amplitudes" in state else madelung_to_quantum(madelung_from_dict(state))
        schedule = require(config, "schedule")
        duration = float(require(schedule, "duration", "schedule"))
        interval = float(schedule.get("sample_interval", duration or 1.0))
        self.schedule = {"duration": duration, "sample_interval": interval}

        count = max(1, round(duration / interval)) if duration > 0 else 0
        times = np.linspace(0.0, duration, count + 1)
        propagator = Propagator(spec_to_hamiltonian(spec), spec.hbar)
        states = [propagator(q, t) for t in times]
        norm_drift = max(abs(float(np.sum(np.abs(s.amplitudes) ** 2)) - 1.0) for s in states)

        self.out.mkdir(parents=True, exist_ok=True)
        csv_path = write_madelung_csv(
            self.output("reference.csv"),
            ((t, quantum_to_madelung(s)) for t, s in zip(times, states)),
            spec.dim,
            self.float_format,
        )
        summary = self.write_summary(
            {
                "samples": int(times.size),
                "energies": propagator.energies.tolist(),
                "norm_drift": norm_drift,
                "final_rho": states[-1].probabilities().tolist(),
                "final_state": quantum_to_dict(states[-1]),
            }
        )
        return [csv_path, summary]

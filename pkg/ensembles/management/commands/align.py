import numpy as np

from ensembles.management.base import ExperimentCommand
from ensembles.phase_alignment import AlignmentState, alignment_run, perturb
from ensembles.serialization import require, spec_from_dict, write_alignment_csv


class Command(ExperimentCommand):
    help = "Integrate the phase-alignment Hamiltonian model and record energy, spreads and momenta"
    name = "align"

    def run_experiment(self, config, options):
        spec = spec_from_dict(require(config, "model"))
        section = require(config, "alignment")
        stiffness = float(require(section, "stiffness", "alignment"))
        step = float(require(section, "step", "alignment"))
        duration = float(require(section, "duration", "alignment"))
        sample_every = int(section.get("sample_every", 1))
        sigma = float(section.get("perturbation", 0.0))
        self.schedule = {"duration": duration, "step": step, "sample_every": sample_every, "perturbation": sigma}

        if "counts" in section:
            phases = section.get("phases", [0.0] * spec.dim)
            s = AlignmentState.aligned(section["counts"], phases, stiffness)
        else:
            beables = np.asarray(require(section, "beables", "alignment"), dtype=np.int64) - 1
            phases = section.get("phases", [0.0] * beables.size)
            s = AlignmentState(beables, phases, np.zeros(beables.size), stiffness, spec.dim)
        if sigma > 0:
            s = perturb(s, sigma, self.generator(options))

        steps = round(duration / step)
        self.stdout.write(f"  {s.size} members, f={stiffness:g}, {steps} steps of {step:g}")
        result = alignment_run(s, spec, step, steps, sample_every)

        self.out.mkdir(parents=True, exist_ok=True)
        csv_path = write_alignment_csv(self.output("alignment.csv"), result, self.float_format)
        summary = self.write_summary(
            {
                "members": s.size,
                "steps": steps,
                "energy_drift": result.energy_drift(),
                "initial_max_spread": float(result.spread[0].max()),
                "final_max_spread": float(result.spread[-1].max()),
                "final_pi_norm": float(result.momentum_norm[-1]),
            }
        )
        return [csv_path, summary]

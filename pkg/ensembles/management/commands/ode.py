from ensembles.management.base import ExperimentCommand
from ensembles.reference_qm import madelung_trajectory
from ensembles.serialization import madelung_from_dict, require, spec_from_dict, write_madelung_csv

DEFAULT_STEP = 1e-3


class Command(ExperimentCommand):
    help = "Integrate the deterministic Madelung equations for a model and initial state"
    name = "ode"

    def run_experiment(self, config, options):
        spec = spec_from_dict(require(config, "model"))
        m = madelung_from_dict(require(config, "state"))
        schedule = require(config, "schedule")
        duration = float(require(schedule, "duration", "schedule"))
        step = float(schedule.get("step", DEFAULT_STEP))
        interval = float(schedule.get("sample_interval", duration or step))
        self.schedule = {"duration": duration, "step": step, "sample_interval": interval}
        every = max(1, round(interval / step))

        samples = [(0.0, m)]
        for k, (t, state) in enumerate(madelung_trajectory(m, spec, duration, step), start=1):
            if k % every == 0:
                samples.append((t, state))
        if duration > 0 and samples[-1][0] < duration - 1e-12:
            samples.append((t, state))

        self.out.mkdir(parents=True, exist_ok=True)
        csv_path = write_madelung_csv(self.output("madelung.csv"), samples, spec.dim, self.float_format)
        final = samples[-1][1]
        summary = self.write_summary(
            {
                "samples": len(samples),
                "final_rho": final.rho.tolist(),
                "final_phi": final.phi.tolist(),
                "min_rho": min(float(s.rho.min()) for _, s in samples),
            }
        )
        self.stdout.write(f"  integrated to t={duration:g} with step {step:g}")
        return [csv_path, summary]

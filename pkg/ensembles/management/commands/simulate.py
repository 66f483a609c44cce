from ensembles.analysis import mixing_profile, node_report
from ensembles.ensemble_core import Mode, add_spectators, run, sample_ensemble
from ensembles.management.base import ExperimentCommand
from ensembles.serialization import (
    ensemble_from_dict,
    madelung_from_dict,
    require,
    schedule_from_dict,
    schedule_to_dict,
    spec_from_dict,
    write_trajectory_csv,
)


class Command(ExperimentCommand):
    help = "Run the stochastic copy dynamics and write the sampled occupation trajectory"
    name = "simulate"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--spread", action="store_true", help="Also write per-class phase spread columns"
        )

    def run_experiment(self, config, options):
        spec = spec_from_dict(require(config, "model"))
        schedule = schedule_from_dict(require(config, "schedule"))
        self.schedule = schedule_to_dict(schedule)
        rng = self.generator(options)

        ensemble = require(config, "ensemble")
        if "members" in ensemble:
            e = ensemble_from_dict(ensemble, spec.dim)
        else:
            m = madelung_from_dict(require(config, "state"))
            e = sample_ensemble(
                m.rho,
                m.phi,
                int(require(ensemble, "N", "ensemble")),
                rng,
                mode=ensemble.get("mode", "aligned"),
                phase_jitter=float(ensemble.get("phase_jitter", 0.0)),
            )
        e = add_spectators(e, config.get("spectators", 0))
        self.stdout.write(f"  {e}, P={spec.dim}, {schedule.stepper} to t={schedule.duration:g}")

        self.out.mkdir(parents=True, exist_ok=True)
        trajectory = run(e, spec, schedule, rng)
        csv_path = write_trajectory_csv(
            self.output("trajectory.csv"), trajectory, self.float_format, include_spread=options["spread"]
        )
        nodes = node_report(trajectory)
        for episode in nodes:
            self.stdout.write(
                f"  class {episode.class_index + 1} empty from t={episode.first_empty:g} for {episode.dwell:g}"
            )
        report = {
            "N": e.size,
            "mode": str(e.mode),
            "samples": int(trajectory.times.size),
            "final_counts": trajectory.counts[-1].tolist(),
            "nodes": [{"class": n.class_index + 1, "first_empty": n.first_empty, "dwell": n.dwell} for n in nodes],
        }
        if e.mode is Mode.PER_MEMBER:
            mixing = mixing_profile(trajectory)
            report["initial_mean_spread"] = float(mixing.mean_spread[0])
            report["mixing_decay_time"] = mixing.decay_time
            if mixing.decay_time is not None:
                self.stdout.write(f"  mean phase spread fell to 1/e by t={mixing.decay_time:g}")
        return [csv_path, self.write_summary(report)]

import numpy as np
from django.conf import settings

from ensembles.analysis import compare_steppers, convergence_study
from ensembles.ensemble_core import add_spectators, sample_ensemble
from ensembles.management.base import ExperimentCommand
from ensembles.serialization import (
    madelung_from_dict,
    require,
    schedule_from_dict,
    schedule_to_dict,
    spec_from_dict,
    write_metric_csv,
)


class Command(ExperimentCommand):
    help = "Compare stochastic ensembles against the exact reference across an N ladder and seeds"
    name = "compare"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--seeds", type=int, help="Number of seeds per N (default from settings)")
        parser.add_argument("--ladder", type=int, nargs="+", help="Ensemble sizes to compare")

    def run_experiment(self, config, options):
        defaults = settings.REALENS
        spec = spec_from_dict(require(config, "model"))
        m = madelung_from_dict(require(config, "state"))
        schedule = schedule_from_dict(require(config, "schedule"))
        ladder = options["ladder"] or config.get("ladder") or defaults["DEFAULT_LADDER"]
        seed_count = options["seeds"] or config.get("seeds") or defaults["DEFAULT_SEEDS"]
        spectators = config.get("spectators", 0)
        self.schedule = schedule_to_dict(schedule) | {"ladder": list(ladder), "seeds": seed_count}

        seeds = [int(s) for s in np.random.SeedSequence(options["seed"]).generate_state(seed_count, dtype=np.uint64)]
        self.out.mkdir(parents=True, exist_ok=True)

        study = convergence_study(spec, m, ladder, seeds, schedule, spectators=spectators, workers=options["workers"])
        for size, tv in zip(study.sizes, study.mean_total_variation):
            self.stdout.write(f"  N={size}: mean time-averaged TV {tv:.4g}")
        self.stdout.write(f"  log-log slope {study.slope:.3f}")

        outputs = [
            write_metric_csv(self.output("convergence.csv"), study.rows(), self.float_format, key="N"),
            write_metric_csv(self.output("comparison.csv"), study.reports[-1].rows(), self.float_format),
        ]
        summary = study.summary() | {"largest": study.reports[-1].summary()}

        steppers = config.get("steppers")
        if steppers:
            rng = self.generator(options, 1)
            e = sample_ensemble(m.rho, m.phi, int(require(steppers, "N", "steppers")), rng)
            e = add_spectators(e, spectators)
            comparison = compare_steppers(
                spec,
                e,
                float(steppers.get("duration", schedule.duration)),
                float(require(steppers, "tau", "steppers")),
                seeds=[int(s) for s in rng.integers(0, 2**63, size=int(steppers.get("seeds", 50)))],
            )
            summary["steppers"] = comparison.summary()
            self.stdout.write(f"  steppers agree within 3 sigma: {comparison.passed}")

        outputs.append(self.write_summary(summary))
        return outputs

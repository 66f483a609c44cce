import json
import time
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from ensembles.exceptions import RealEnsembleError
from ensembles.models import Experiment, config_digest, module_versions
from ensembles.serialization import load_json

MAX_SEED = 2**64 - 1


class ExperimentCommand(BaseCommand):
    """
    Shared shape of every experiment command.

    Subclasses implement run_experiment(config, options) and return the paths
    they wrote. The ledger row and manifest.json are created before it runs and
    closed afterwards with the outcome, so a failure always leaves a manifest
    saying what went wrong.
    """

    def add_arguments(self, parser):
        defaults = settings.REALENS
        parser.add_argument("--config", required=True, help="Path to the experiment JSON config")
        parser.add_argument("--seed", type=int, default=defaults["DEFAULT_SEED"], help="Master seed (0..2**64-1)")
        parser.add_argument("--out", required=True, help="Output directory")
        parser.add_argument(
            "--workers", type=int, default=defaults["DEFAULT_WORKERS"], help="Worker processes (wall time only)"
        )

    def handle(self, *args, **options):
        start_time = time.perf_counter()
        seed = options["seed"]
        if not 0 <= seed <= MAX_SEED:
            raise CommandError(f"--seed must lie in 0..{MAX_SEED}, got {seed}")
        if options["workers"] < 1:
            raise CommandError("--workers must be at least 1")

        self.float_format = settings.REALENS["CSV_FLOAT_FORMAT"]
        self.out = Path(options["out"])
        config_path = Path(options["config"])
        self.schedule = {}

        self.stdout.write(f"Running {self.name} with {config_path} (seed {seed})...")
        experiment = Experiment.objects.create(
            command=self.name,
            config_path=str(config_path),
            config_digest=config_digest(config_path) if config_path.is_file() else "",
            seed=str(seed),
            workers=options["workers"],
            module_versions=module_versions(),
            output_dir=str(self.out),
        )
        try:
            experiment.write_manifest()
            config = load_json(config_path)
            outputs = self.run_experiment(config, options)
        except (RealEnsembleError, OSError, ValueError, KeyError, TypeError) as e:
            experiment.schedule = self.schedule
            experiment.save(update_fields=["schedule"])
            message = f"{type(e).__name__}: {e}"
            experiment.finish(Experiment.Status.FAILED, message)
            raise CommandError(f"{self.name} failed: {message}") from e

        experiment.schedule = self.schedule
        experiment.save(update_fields=["schedule"])
        experiment.finish(Experiment.Status.SUCCEEDED, outputs=outputs)

        elapsed = time.perf_counter() - start_time
        self.stdout.write(
            self.style.SUCCESS(f"{self.name} complete: {len(outputs)} files written to {self.out} in {elapsed:.2f}s")
        )

    def run_experiment(self, config, options):
        raise NotImplementedError

    def generator(self, options, *key):
        return np.random.default_rng(np.random.SeedSequence(options["seed"], spawn_key=key))

    def output(self, name):
        return self.out / name

    def write_summary(self, summary, name="summary.json"):
        path = self.output(name)
        path.write_text(json.dumps(_finite(summary), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _finite(value):
    """Replace NaN and infinities with None so summaries stay strict JSON."""
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value

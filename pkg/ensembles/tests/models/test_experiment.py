import hashlib
import json

import pytest

from ensembles.models import Experiment, config_digest, module_versions


@pytest.fixture
def experiment(db, tmp_path):
    return Experiment.objects.create(
        command="simulate",
        config_path=str(tmp_path / "config.json"),
        config_digest="0" * 64,
        seed=str(2**64 - 1),
        output_dir=str(tmp_path / "out"),
        module_versions=module_versions(),
    )


class TestConfigDigest:
    def test_digest_of_file_bytes(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_bytes(b'{"model": {}}')
        assert config_digest(path) == hashlib.sha256(b'{"model": {}}').hexdigest()


class TestModuleVersions:
    def test_reports_the_stack(self):
        assert set(module_versions()) == {"realens", "django", "numpy", "scipy"}


@pytest.mark.django_db
class TestExperiment:
    def test_starts_running(self, experiment):
        assert experiment.status == Experiment.Status.RUNNING
        assert experiment.finished_at is None
        assert str(experiment) == f"Experiment simulate seed={2**64 - 1} (running)"

    def test_manifest_is_written_to_output_dir(self, experiment, tmp_path):
        path = experiment.write_manifest()

        assert path == tmp_path / "out" / "manifest.json"
        manifest = json.loads(path.read_text())
        assert manifest["seed"] == "18446744073709551615"
        assert manifest["status"] == "running"
        assert manifest["finished_at"] is None

    def test_finish_records_outcome(self, experiment, tmp_path):
        experiment.finish(Experiment.Status.SUCCEEDED, outputs=[tmp_path / "out" / "trajectory.csv"])

        experiment.refresh_from_db()
        assert experiment.status == Experiment.Status.SUCCEEDED
        assert experiment.outputs == [str(tmp_path / "out" / "trajectory.csv")]
        assert experiment.finished_at is not None
        manifest = json.loads(experiment.manifest_path.read_text())
        assert manifest["status"] == "succeeded"

    def test_failure_keeps_message(self, experiment):
        experiment.finish(Experiment.Status.FAILED, "StepSizeError: too large")

        experiment.refresh_from_db()
        assert experiment.message == "StepSizeError: too large"
        assert experiment.outputs == []

    def test_latest_first(self, experiment, tmp_path):
        later = Experiment.objects.create(command="ode", config_path="c.json", seed="1", output_dir=str(tmp_path))
        assert list(Experiment.objects.all()) == [later, experiment]

import json
from io import StringIO

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from ensembles.models import Experiment


def compare(config_path, out, **options):
    stdout = StringIO()
    call_command("compare", config=str(config_path), out=str(out), stdout=stdout, **options)
    return stdout.getvalue()


@pytest.mark.django_db
class TestCompareCommand:
    def test_small_ladder(self, rabi_config, write_config, tmp_path):
        out = tmp_path / "out"
        output = compare(write_config(rabi_config), out, ladder=[20, 40], seeds=2, seed=9)

        convergence = (out / "convergence.csv").read_text().splitlines()
        assert convergence[0] == "N,metric,value"
        assert [line.split(",")[:2] for line in convergence[1:]] == [
            ["20", "mean_total_variation"],
            ["20", "standard_error"],
            ["40", "mean_total_variation"],
            ["40", "standard_error"],
        ]
        comparison = (out / "comparison.csv").read_text().splitlines()
        assert comparison[0] == "t,metric,value"
        assert len(comparison) == 1 + 2 * 5

        summary = json.loads((out / "summary.json").read_text())
        assert summary["ladder"] == [20, 40]
        assert summary["largest"]["N"] == 40
        assert summary["largest"]["seeds"] == 2
        assert "steppers" not in summary
        assert "log-log slope" in output

        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["schedule"]["ladder"] == [20, 40]
        assert manifest["schedule"]["seeds"] == 2

    def test_ladder_from_config(self, rabi_config, write_config, tmp_path):
        rabi_config.update({"ladder": [10], "seeds": 1})
        compare(write_config(rabi_config), tmp_path / "out")

        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["ladder"] == [10]

    def test_stepper_comparison(self, rabi_config, write_config, tmp_path):
        rabi_config["steppers"] = {"N": 20, "tau": 0.01, "seeds": 4, "duration": 0.2}
        output = compare(write_config(rabi_config), tmp_path / "out", ladder=[10], seeds=1)

        steppers = json.loads((tmp_path / "out" / "summary.json").read_text())["steppers"]
        assert steppers["seeds"] == 4
        assert sum(steppers["exact_mean"]) == pytest.approx(20)
        assert sum(steppers["leap_mean"]) == pytest.approx(20)
        assert "steppers agree within 3 sigma" in output

    def test_worker_count_does_not_change_results(self, rabi_config, write_config, tmp_path):
        config_path = write_config(rabi_config)
        compare(config_path, tmp_path / "serial", ladder=[20], seeds=3, workers=1)
        compare(config_path, tmp_path / "parallel", ladder=[20], seeds=3, workers=2)

        for name in ("convergence.csv", "comparison.csv"):
            assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "parallel" / name).read_bytes()

    def test_rejects_zero_workers(self, rabi_config, write_config, tmp_path):
        with pytest.raises(CommandError, match="--workers"):
            compare(write_config(rabi_config), tmp_path / "out", workers=0)
        assert not Experiment.objects.exists()

import json
from io import StringIO

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError


@pytest.fixture
def align_config(rabi_config):
    return {
        "model": rabi_config["model"],
        "alignment": {
            "counts": [5, 5],
            "phases": [0.0, 1.0],
            "stiffness": 2.0,
            "step": 0.01,
            "duration": 0.5,
            "sample_every": 10,
        },
    }


def run_align(config_path, out, **options):
    call_command("align", config=str(config_path), out=str(out), stdout=StringIO(), **options)
    return json.loads((out / "summary.json").read_text())


@pytest.mark.django_db
class TestAlignCommand:
    def test_aligned_start_keeps_zero_spread(self, align_config, write_config, tmp_path):
        summary = run_align(write_config(align_config), tmp_path / "out")

        lines = (tmp_path / "out" / "alignment.csv").read_text().splitlines()
        assert lines[0] == "t,energy,spread_1,spread_2,pi_norm"
        assert len(lines) == 7
        assert all(float(line.split(",")[2]) == float(line.split(",")[3]) == 0.0 for line in lines[1:])
        assert summary["members"] == 10
        assert summary["final_max_spread"] == 0.0

    def test_perturbed_start_conserves_energy(self, align_config, write_config, tmp_path):
        align_config["alignment"]["perturbation"] = 0.1
        summary = run_align(write_config(align_config), tmp_path / "out", seed=5)

        assert summary["initial_max_spread"] > 0
        assert summary["energy_drift"] <= 1e-4

    def test_explicit_beables(self, align_config, write_config, tmp_path):
        align_config["alignment"] = {
            "beables": [1, 1, 2],
            "phases": [0.0, 0.0, 2.0],
            "stiffness": 1.0,
            "step": 0.05,
            "duration": 0.1,
        }
        summary = run_align(write_config(align_config), tmp_path / "out")
        assert summary["steps"] == 2

    def test_stiff_step_fails(self, align_config, write_config, tmp_path):
        align_config["alignment"]["stiffness"] = 20.0
        with pytest.raises(CommandError, match="StepSizeError"):
            run_align(write_config(align_config), tmp_path / "out")

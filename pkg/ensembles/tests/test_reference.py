import json
import math
from io import StringIO

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError


def run_reference(config_path, out):
    call_command("reference", config=str(config_path), out=str(out), stdout=StringIO())
    return json.loads((out / "summary.json").read_text())


@pytest.mark.django_db
class TestReferenceCommand:
    def test_exact_rabi_evolution(self, rabi_config, write_config, tmp_path):
        summary = run_reference(write_config(rabi_config), tmp_path / "out")

        assert summary["samples"] == 5
        assert summary["energies"] == pytest.approx([-1.0, 1.0])
        assert summary["norm_drift"] <= 1e-12
        assert summary["final_rho"][0] == pytest.approx((1 - 0.5 * math.sin(4.0)) / 2, abs=1e-12)

    def test_amplitude_state(self, rabi_config, write_config, tmp_path):
        rabi_config["state"] = {"amplitudes": [[1.0, 0.0], [0.0, 0.0]]}
        summary = run_reference(write_config(rabi_config), tmp_path / "out")

        assert summary["final_rho"][0] == pytest.approx(math.cos(2.0) ** 2)
        # exp(-i sigma_x t) (1, 0) = (cos t, -i sin t)
        amplitudes = [x for pair in summary["final_state"]["amplitudes"] for x in pair]
        assert amplitudes == pytest.approx([math.cos(2.0), 0.0, 0.0, -math.sin(2.0)], abs=1e-12)
        lines = (tmp_path / "out" / "reference.csv").read_text().splitlines()
        first = [float(cell) for cell in lines[1].split(",")]
        assert first[:4] == [0.0, 1.0, 0.0, 0.0]
        assert math.isnan(first[4])

    def test_unnormalized_amplitudes_fail(self, rabi_config, write_config, tmp_path):
        rabi_config["state"] = {"amplitudes": [[1.0, 0.0], [1.0, 0.0]]}
        with pytest.raises(CommandError, match="NormalizationError"):
            run_reference(write_config(rabi_config), tmp_path / "out")

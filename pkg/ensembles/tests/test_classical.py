import json
from io import StringIO

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError


@pytest.fixture
def packet_config():
    return {
        "lattice": {"sites": 128},
        "packet": {"center": 64.0, "width": 8.0, "velocity": 0.2},
        "schedule": {"duration": 5.0, "step": 0.5, "sample_interval": 1.0},
    }


def run_classical(config_path, out):
    call_command("classical", config=str(config_path), out=str(out), stdout=StringIO())
    return json.loads((out / "summary.json").read_text())


@pytest.mark.django_db
class TestClassicalCommand:
    def test_free_packet_drifts_linearly(self, packet_config, write_config, tmp_path):
        out = tmp_path / "out"
        summary = run_classical(write_config(packet_config), out)

        assert summary["final_mean_x"] - summary["initial_mean_x"] == pytest.approx(1.0, abs=0.05)
        assert summary["convention"] == "standard"
        assert summary["lattice"] == {"sites": 128, "spacing": 1.0, "mass": 1.0, "E": [0.0] * 128, "hbar": 1.0}
        packet = (out / "packet.csv").read_text().splitlines()
        assert packet[0] == "t,mean_x,mean_v,width"
        assert len(packet) == 7
        residuals = (out / "residuals.csv").read_text().splitlines()
        assert residuals[0] == "t,site,continuity,hj,vq"
        assert len(residuals) == 1 + 10 * 128

    def test_printed_convention_leaves_large_residual(self, packet_config, write_config, tmp_path):
        standard = run_classical(write_config(packet_config), tmp_path / "standard")
        packet_config["convention"] = "printed"
        printed = run_classical(write_config(packet_config, "printed.json"), tmp_path / "printed")

        assert printed["mean_hj_residual"] > 10 * standard["mean_hj_residual"]

    def test_odd_lattice_fails(self, packet_config, write_config, tmp_path):
        packet_config["lattice"]["sites"] = 127
        with pytest.raises(CommandError, match="SpecValidationError"):
            run_classical(write_config(packet_config), tmp_path / "out")

    def test_packet_at_the_edge_fails(self, packet_config, write_config, tmp_path):
        packet_config["packet"]["center"] = 2.0
        with pytest.raises(CommandError, match="PacketBoundaryError"):
            run_classical(write_config(packet_config), tmp_path / "out")

from ensembles.classical_limit import (
    HJConvention,
    gaussian_packet,
    packet_mean_trajectory,
    residual_series,
    weighted_mean,
)
from ensembles.management.base import ExperimentCommand
from ensembles.serialization import lattice_from_dict, lattice_to_dict, require, write_packet_csv, write_residual_csv


class Command(ExperimentCommand):
    help = "Evolve a lattice wave packet and check its classical (Hamilton-Jacobi) limit"
    name = "classical"

    def run_experiment(self, config, options):
        lattice = lattice_from_dict(require(config, "lattice"))
        packet_config = require(config, "packet")
        schedule = require(config, "schedule")
        duration = float(require(schedule, "duration", "schedule"))
        step = float(schedule.get("step", 0.1))
        interval = float(schedule.get("sample_interval", duration or step))
        convention = HJConvention(config.get("convention", HJConvention.STANDARD))
        include_vq = bool(config.get("include_vq", True))
        self.schedule = {"duration": duration, "step": step, "sample_interval": interval}

        packet = gaussian_packet(
            lattice,
            center=float(packet_config.get("center", 0.5 * lattice.length)),
            width=float(require(packet_config, "width", "packet")),
            velocity=float(packet_config.get("velocity", 0.0)),
        )
        self.out.mkdir(parents=True, exist_ok=True)
        trajectory = packet_mean_trajectory(packet, lattice, duration, interval)
        outputs = [write_packet_csv(self.output("packet.csv"), trajectory, self.float_format)]

        samples = list(residual_series(packet, lattice, duration, step, include_vq, convention)) if duration > 0 else []
        outputs.append(write_residual_csv(self.output("residuals.csv"), samples, self.float_format))
        continuity = [weighted_mean(s.continuity, s.rho) for s in samples]
        hamilton_jacobi = [weighted_mean(s.hamilton_jacobi, s.rho) for s in samples]
        kinetic = [weighted_mean(s.kinetic, s.rho) for s in samples]

        summary = {
            "convention": str(convention),
            "include_vq": include_vq,
            "lattice": lattice_to_dict(lattice),
            "initial_mean_x": float(trajectory.mean_position[0]),
            "final_mean_x": float(trajectory.mean_position[-1]),
            "mean_continuity_residual": sum(continuity) / len(continuity) if samples else 0.0,
            "mean_hj_residual": sum(hamilton_jacobi) / len(hamilton_jacobi) if samples else 0.0,
            "mean_kinetic": sum(kinetic) / len(kinetic) if samples else 0.0,
        }
        self.stdout.write(
            f"  <x> moved {summary['final_mean_x'] - summary['initial_mean_x']:.4g}; "
            f"mean HJ residual {summary['mean_hj_residual']:.3e}"
        )
        outputs.append(self.write_summary(summary))
        return outputs

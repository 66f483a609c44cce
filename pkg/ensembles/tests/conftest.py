import json
import math

import numpy as np
import pytest

from ensembles.model_spec import ModelSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def rabi_spec():
    """H = sigma_x: omega = 0, R_12 = 1, delta = 0."""
    return ModelSpec.from_arrays(omega=[0.0, 0.0], coupling=[[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def frozen_spec():
    """Free rotation only: R = 0."""
    return ModelSpec.from_arrays(omega=[0.3, -0.2, 1.1], coupling=np.zeros((3, 3)))


@pytest.fixture
def rabi_config():
    return {
        "model": {"dim": 2, "hbar": 1.0, "omega": [0.0, 0.0], "R": [[0.0, 1.0], [1.0, 0.0]], "delta": [[0.0, 0.0], [0.0, 0.0]]},
        "state": {"rho": [0.5, 0.5], "phi": [0.0, math.pi / 6]},
        "ensemble": {"N": 200, "mode": "aligned"},
        "schedule": {"stepper": "exact-event", "duration": 2.0, "phase_substep": 0.01, "sample_interval": 0.5},
    }


@pytest.fixture
def write_config(tmp_path):
    def write(config, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(config))
        return path

    return write

"""Pytest configuration and fixtures."""

from pathlib import Path

import numpy as np
import pytest
import yaml

from src.data import gen_kink
from src.inference import VariationalState
from src.model import build_model
from src.schema import default_flow_specs

PROJECT_ROOT = Path(__file__).parent.parent
CONFIG_DIR = PROJECT_ROOT / "configs"


def finite_difference(fn, x, h=1e-6):
    """Central-difference gradient of a scalar numpy function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        step = np.zeros_like(x)
        step[index] = h
        grad[index] = (fn(x + step) - fn(x - step)) / (2.0 * h)
    return grad


@pytest.fixture
def rng():
    """Seeded generator."""
    return np.random.default_rng(0)


@pytest.fixture
def small_tgpssm():
    """1-D TGPSSM with the default 3 x SAL + Tanh flow and 5 inducing points."""
    return build_model(1, 1, np.random.default_rng(1), num_inducing=5,
                       flow_specs=default_flow_specs(), z_range=(-3.0, 1.0))


@pytest.fixture
def small_gpssm():
    """Same structure as ``small_tgpssm`` without a flow."""
    return build_model(1, 1, np.random.default_rng(1), num_inducing=5, z_range=(-3.0, 1.0))


@pytest.fixture
def small_vs():
    """Small inference network for 1-D states and observations."""
    return VariationalState.create(1, 1, np.random.default_rng(2), hidden_units=4, head_units=(8,))


@pytest.fixture
def kink_data():
    """Three short kink sequences."""
    return gen_kink(num_seq=3, T=10, seed=0)


@pytest.fixture
def tiny_config(tmp_path):
    """
    Small kink CO-TGPSSM config written to disk.

    Returns:
        (path to the YAML file, artifact directory)
    """
    with open(CONFIG_DIR / "kink_co_tgpssm.yaml") as handle:
        raw = yaml.safe_load(handle)
    raw["name"] = "tiny"
    raw["dataset"].update({"num_sequences": 3, "length": 10})
    raw["model"]["num_inducing"] = 5
    raw["inference"] = {"hidden_units": 4, "head_units": [8]}
    raw["trainer"].update({"epochs": 2, "log_every": 1})
    raw["evaluation"].update({"grid_points": 20, "forecast_horizon": 5})
    path = tmp_path / "tiny.yaml"
    with open(path, "w") as handle:
        yaml.safe_dump(raw, handle)
    return path, tmp_path / "runs" / "tiny"

"""Tests for configuration models, presets and overrides."""

import math

import pytest
import yaml
from pydantic import ValidationError

from src.schema import (
    DatasetSpec, ElboBreakdown, FlowLayerSpec, ModelSpec, RunConfig, apply_overrides, default_flow_specs,
    dump_run_config, list_presets, load_run_config, run_directory,
)
from src.utils.errors import ConfigurationError
from tests.conftest import CONFIG_DIR


class TestPresets:
    """Bundled experiment configurations."""

    def test_every_preset_validates(self):
        names = list_presets()
        assert len(names) == len(list(CONFIG_DIR.glob("*.yaml")))
        for name in names:
            config = load_run_config(name)
            assert config.name == name, f"{name}: name should match the file"

    def test_gpssm_presets_have_no_flow(self):
        for name in list_presets():
            config = load_run_config(name)
            assert config.model.is_transformed == ("tgpssm" in name), name

    def test_lorenz_preset(self):
        config = load_run_config("lorenz_co_tgpssm")
        assert config.model.state_dim == 3 and config.model.obs_dim == 3
        assert config.dataset.chunk_length == 50

    def test_unknown_preset(self):
        with pytest.raises(FileNotFoundError):
            load_run_config("no_such_experiment")


class TestOverrides:
    """Dotted-key overrides."""

    def test_scalars_parsed_as_yaml(self):
        raw = apply_overrides({"trainer": {"epochs": 5}}, {"trainer.epochs": "10", "trainer.r0": "-inf"})
        assert raw["trainer"]["epochs"] == 10
        assert raw["trainer"]["r0"] == "-inf"

    def test_missing_sections_created(self):
        assert apply_overrides({}, {"evaluation.grid_points": 5}) == {"evaluation": {"grid_points": 5}}

    def test_override_through_a_value(self):
        with pytest.raises(ConfigurationError):
            apply_overrides({"seed": 1}, {"seed.value": "2"})

    def test_override_applied_before_validation(self):
        config = load_run_config("kink_jo_gpssm", {"trainer.epochs": "3", "model.num_inducing": "4"})
        assert config.trainer.epochs == 3 and config.model.num_inducing == 4

    def test_invalid_override_value(self):
        with pytest.raises(ValidationError):
            load_run_config("kink_jo_gpssm", {"trainer.learning_rate": "-1"})

    def test_constrained_infinite_r0(self):
        config = load_run_config("kink_co_gpssm", {"trainer.r0": "-inf"})
        assert config.trainer.r0 == -math.inf


class TestModels:
    """Validation rules of the configuration models."""

    def test_dataset_needs_one_source(self):
        with pytest.raises(ValidationError):
            DatasetSpec()
        with pytest.raises(ValidationError):
            DatasetSpec(generator="kink", csv_path="series.csv")

    def test_csv_dataset_needs_columns(self):
        with pytest.raises(ValidationError):
            DatasetSpec(csv_path="series.csv")

    def test_generator_fixes_obs_dim(self):
        with pytest.raises(ValidationError):
            RunConfig(dataset=DatasetSpec(generator="lorenz"), model=ModelSpec(state_dim=1, obs_dim=1))

    def test_obs_dim_not_above_state_dim(self):
        with pytest.raises(ValidationError):
            ModelSpec(state_dim=1, obs_dim=2)

    def test_coupling_needs_two_states(self):
        with pytest.raises(ValidationError):
            ModelSpec(state_dim=1, flow=[FlowLayerSpec(kind="coupling")])

    def test_unknown_flow_kind(self):
        with pytest.raises(ValidationError):
            FlowLayerSpec(kind="spline")

    def test_default_flow(self):
        kinds = [spec.kind for spec in default_flow_specs()]
        assert kinds == ["SAL", "SAL", "SAL", "Tanh"]

    def test_extra_fields_forbidden(self):
        with pytest.raises(ValidationError):
            ModelSpec(hidden_layers=3)

    def test_elbo_breakdown(self):
        breakdown = ElboBreakdown.from_terms(kl_x0=1.0, kl_u=2.0, entropy=3.0, state_recon=-4.0, data_recon=-5.0)
        assert breakdown.total == -9.0
        with pytest.raises(ValidationError):
            ElboBreakdown.from_terms(kl_x0=-1.0, kl_u=0.0, entropy=0.0, state_recon=0.0, data_recon=0.0)
        with pytest.raises(ValidationError):
            ElboBreakdown(kl_x0=0.0, kl_u=0.0, entropy=0.0, state_recon=0.0, data_recon=0.0, total=1.0)


class TestPersistence:
    """Resolved configs on disk and fingerprints."""

    def test_dump_then_load(self, tmp_path):
        config = load_run_config("kink_co_tgpssm", {"trainer.r0": "-inf"})
        path = dump_run_config(config, tmp_path)
        assert load_run_config(path) == config

    def test_fingerprint_tracks_changes(self):
        base = load_run_config("kink_jo_tgpssm")
        assert base.fingerprint() == load_run_config("kink_jo_tgpssm").fingerprint()
        assert base.fingerprint() != load_run_config("kink_jo_tgpssm", {"seed": "1"}).fingerprint()

    def test_run_directory(self, tmp_path, monkeypatch):
        config = load_run_config("kink_jo_gpssm")
        monkeypatch.setenv("TGPSSM_OUTPUT_ROOT", str(tmp_path))
        assert run_directory(config) == tmp_path / "kink_jo_gpssm"
        explicit = load_run_config("kink_jo_gpssm", {"output_dir": str(tmp_path / "x")})
        assert run_directory(explicit) == tmp_path / "x"

    def test_dumped_yaml_is_plain(self, tmp_path):
        path = dump_run_config(load_run_config("kink_jo_tgpssm"), tmp_path)
        raw = yaml.safe_load(path.read_text())
        assert raw["model"]["flow"][3]["kind"] == "Tanh"

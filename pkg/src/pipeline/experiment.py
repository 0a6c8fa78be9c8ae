"""Experiment pipeline: dataset -> model -> training -> evaluation -> artifacts."""

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.data import (
    DEFAULT_GRIDS, PreparedData, kink_function, kink_step_function, prepare_dataset,
)
from src.evaluation import (
    evaluation_grid, forecast_rmse, inferred_state_mse, observation_mse,
    posterior_transition, transition_mse, write_transition_csv,
)
from src.inference import VariationalState, elbo
from src.model import TgpssmModel, build_model
from src.schema import RunConfig, dump_run_config, run_directory
from src.training import (
    MODEL_PREFIX, VS_PREFIX, TrainingResult, load_checkpoint, save_checkpoint, train,
)
from src.utils.logger import get_logger, log_run_config

REFERENCE_FUNCTIONS = {
    "kink": kink_function,
    "kink_step": kink_step_function,
}

CHECKPOINT_NAME = "checkpoint.npz"
LOG_NAME = "train_log.jsonl"
METRICS_NAME = "metrics.json"
TRANSITION_CSV_NAME = "transition.csv"
RESULT_NAME = "result.json"


def build_components(config: RunConfig) -> Tuple[TgpssmModel, VariationalState]:
    """Initial model and variational state, seeded by ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    spec = config.model
    model = build_model(
        spec.state_dim,
        spec.obs_dim,
        rng,
        num_inducing=spec.num_inducing,
        control_dim=spec.control_dim,
        flow_specs=spec.flow,
        lengthscale=spec.kernel.lengthscale,
        variance=spec.kernel.variance,
        process_noise=spec.process_noise,
        observation_noise=spec.observation_noise,
        z_range=spec.z_range,
        train_inducing=spec.train_inducing,
        inducing_init_std=spec.inducing_init_std,
        train_noise=spec.train_noise,
    )
    vs = VariationalState.create(
        spec.state_dim,
        spec.obs_dim,
        rng,
        control_dim=spec.control_dim,
        hidden_units=config.inference.hidden_units,
        head_units=config.inference.head_units,
        init_std=config.inference.init_std,
    )
    return model, vs


def all_parameters(model: TgpssmModel, vs: VariationalState) -> Dict[str, np.ndarray]:
    params = model.parameter_values(MODEL_PREFIX)
    params.update(vs.parameter_values(VS_PREFIX))
    return params


def restore_components(checkpoint_path: Any) -> Tuple[RunConfig, TgpssmModel, VariationalState, Dict[str, Any]]:
    """Rebuild (config, model, vs, meta) from a checkpoint file."""
    params, meta = load_checkpoint(checkpoint_path)
    config = RunConfig.model_validate(meta["config"])
    model, vs = build_components(config)
    return config, model.bind(params, MODEL_PREFIX), vs.bind(params, VS_PREFIX), meta


class ExperimentResult:
    """Result of one experiment run."""

    def __init__(
        self,
        config: RunConfig,
        metrics: Dict[str, float],
        artifacts: Dict[str, str],
        training: Optional[TrainingResult] = None,
        processing_time: float = 0.0
    ):
        """
        Initialize experiment result.

        Args:
            config: Resolved configuration
            metrics: Metric name -> value
            artifacts: Artifact name -> file path
            training: TrainingResult (None for evaluation-only runs)
            processing_time: Total wall-clock seconds
        """
        self.config = config
        self.metrics = metrics
        self.artifacts = artifacts
        self.training = training
        self.processing_time = processing_time

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary."""
        return {
            "name": self.config.name,
            "config_fingerprint": self.config.fingerprint(),
            "metrics": self.metrics,
            "artifacts": self.artifacts,
            "training": None if self.training is None else self.training.to_dict(),
            "metadata": {
                "seed": self.config.seed,
                "trainer_seed": self.config.trainer.seed,
                "processing_time_seconds": self.processing_time,
            },
        }


class ExperimentPipeline:
    """Runs one RunConfig end to end and writes its artifacts."""

    def __init__(self, config: RunConfig, output_dir: Optional[Any] = None):
        """
        Initialize the pipeline.

        Args:
            config: Resolved run configuration
            output_dir: Artifact directory (defaults to the config's run directory)
        """
        self.config = config
        self.output_dir = Path(output_dir) if output_dir is not None else run_directory(config)
        self.logger = get_logger()
        self._data: Optional[PreparedData] = None

    @property
    def data(self) -> PreparedData:
        if self._data is None:
            self._data = prepare_dataset(self.config.dataset)
        return self._data

    def run(self) -> ExperimentResult:
        """
        Train and evaluate.

        Steps:
        1. Persist the resolved config
        2. Prepare data (generate or ingest, split, standardise, chunk)
        3. Build and train model + variational state
        4. Checkpoint
        5. Evaluate and write metrics
        """
        start = time.time()
        log_run_config(self.logger, self.config)
        artifacts = {"config": str(dump_run_config(self.config, self.output_dir))}

        model, vs = build_components(self.config)
        self.logger.info(f"{model!r}: {model.num_parameters()} trainable parameters, "
                         f"inference {vs.num_parameters()}")
        log_path = self.output_dir / LOG_NAME
        result = train(model, vs, self.data.train, self.config.trainer, log_path=log_path)
        artifacts["log"] = str(log_path)
        artifacts["checkpoint"] = str(self.save(result))

        metrics, eval_artifacts = self.evaluate(result.model, result.vs)
        artifacts.update(eval_artifacts)
        outcome = ExperimentResult(self.config, metrics, artifacts, result, time.time() - start)
        with open(self.output_dir / RESULT_NAME, "w") as handle:
            json.dump(outcome.to_dict(), handle, indent=2)
        return outcome

    def save(self, result: TrainingResult) -> Path:
        meta = {
            "config": self.config.model_dump(mode="json"),
            "training": result.to_dict(),
            "rng": {
                "init_seed": self.config.seed,
                "trainer_seed": self.config.trainer.seed,
                "next_epoch": result.epochs,
            },
        }
        return save_checkpoint(self.output_dir / CHECKPOINT_NAME, all_parameters(result.model, result.vs), meta)

    def evaluate(self, model: TgpssmModel, vs: VariationalState) -> Tuple[Dict[str, float], Dict[str, str]]:
        """
        Compute every metric the dataset supports.

        - elbo: on the training split
        - transition_mse: kink / kink-step reference functions on a grid
        - forecast_rmse: when a test split is held out
        - state_mse / observation_mse: when true states are known
        """
        data = self.data
        spec = self.config.evaluation
        metrics: Dict[str, float] = {}
        artifacts: Dict[str, str] = {}

        metrics["elbo"] = self._elbo(model, vs, data)

        generator = self.config.dataset.generator
        if generator in REFERENCE_FUNCTIONS and model.control_dim == 0:
            grid = evaluation_grid(spec.grid_range or DEFAULT_GRIDS[generator], spec.grid_points)
            reference = REFERENCE_FUNCTIONS[generator]
            metrics["transition_mse"] = transition_mse(model, reference, grid)
            mean, lower, upper = posterior_transition(model, grid)
            path = write_transition_csv(self.output_dir / TRANSITION_CSV_NAME, grid, reference(grid), mean, lower, upper)
            artifacts["transition_csv"] = str(path)

        if data.test is not None:
            errors = []
            for past, future in zip(data.history.sequences, data.test.sequences):
                horizon = min(spec.forecast_horizon, future.length)
                errors.append(forecast_rmse(
                    model, vs, past.observations, future.observations, horizon=horizon,
                    controls_train=past.controls, controls_test=future.controls,
                ))
            metrics["forecast_rmse"] = float(np.mean(errors))

        if data.history.has_states:
            sequences = data.history.sequences
            metrics["state_mse"] = float(np.mean([
                inferred_state_mse(vs, seq.observations, seq.states, seq.controls) for seq in sequences
            ]))
            metrics["observation_mse"] = float(np.mean([
                observation_mse(seq.observations, seq.states, model.C) for seq in sequences
            ]))

        with open(self.output_dir / METRICS_NAME, "w") as handle:
            json.dump(metrics, handle, indent=2)
        artifacts["metrics"] = str(self.output_dir / METRICS_NAME)
        for name, value in metrics.items():
            self.logger.info(f"  {name:25s}: {value:.6f}")
        return metrics, artifacts

    def _elbo(self, model: TgpssmModel, vs: VariationalState, data: PreparedData) -> float:
        total = 0.0
        for index, (y, controls, _) in enumerate(data.train.groups()):
            breakdown = elbo(model, vs, y, n=self.config.evaluation.num_mc_samples,
                             seed=self.config.trainer.seed + index, controls=controls)
            # kl_u belongs to the shared transition and is counted once
            total += breakdown.total + (breakdown.kl_u if index else 0.0)
        return total

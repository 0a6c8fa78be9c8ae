"""Configuration, ELBO breakdown and metric report models."""

import hashlib
import json
import math
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

ELEMENTARY_KINDS = (
    "arcsinh", "log", "exp", "linear", "sinharcsinh", "boxcox",
    "tanh", "sal", "sumoftanh", "sumoflogexp",
)
COUPLING_KINDS = ("coupling", "realnvp")


def _normalise_kind(kind: str) -> str:
    return kind.strip().lower().replace("-", "").replace("_", "")


class KernelSpec(BaseModel):
    """Initial SE-kernel hyperparameters (shared by every output dimension at start)."""

    lengthscale: float = Field(default=1.0, gt=0, description="Initial length-scale")
    variance: float = Field(default=1.0, gt=0, description="Initial output scale sigma^2")

    model_config = {"extra": "forbid"}


class FlowLayerSpec(BaseModel):
    """One layer of a flow stack."""

    kind: str = Field(description="Elementary kind (e.g. SAL, Tanh) or 'coupling'")
    init: Dict[str, Union[float, List[float]]] = Field(
        default_factory=dict,
        description="Initial constrained parameter values"
    )
    trainable: bool = Field(default=True, description="Whether the layer's parameters are optimised")
    num_terms: int = Field(default=1, ge=1, description="Number of summed terms (SumOfTanh, SumOfLogExp)")
    hidden_units: List[int] = Field(default_factory=lambda: [16, 16], description="Coupling network widths")
    split: Optional[int] = Field(default=None, ge=1, description="Coupling split index (default d_x // 2)")

    @field_validator('kind')
    @classmethod
    def validate_kind(cls, v: str) -> str:
        """Reject unknown flow kinds early."""
        if _normalise_kind(v) not in ELEMENTARY_KINDS + COUPLING_KINDS:
            raise ValueError(f"unknown flow kind '{v}'")
        return v

    @property
    def is_coupling(self) -> bool:
        return _normalise_kind(self.kind) in COUPLING_KINDS

    model_config = {"extra": "forbid"}


def default_flow_specs() -> List[FlowLayerSpec]:
    """Three SAL layers followed by one Tanh layer (16 parameters)."""
    return [FlowLayerSpec(kind="SAL") for _ in range(3)] + [
        FlowLayerSpec(kind="Tanh", init={"a": 10.0, "b": 0.1, "c": 0.0, "d": 0.0})
    ]


class ModelSpec(BaseModel):
    """Generative model structure and initial values."""

    state_dim: int = Field(default=1, ge=1, description="Latent state dimension d_x")
    obs_dim: int = Field(default=1, ge=1, description="Observation dimension d_y (C = [I 0])")
    control_dim: int = Field(default=0, ge=0, description="Control-input dimension d_u")
    num_inducing: int = Field(default=15, ge=1, description="Number of inducing points M")
    kernel: KernelSpec = Field(default_factory=KernelSpec)
    flow: Optional[List[FlowLayerSpec]] = Field(
        default=None,
        description="Flow stack; null or empty gives a plain GPSSM"
    )
    process_noise: float = Field(default=0.05, gt=0, description="Initial diagonal of Q")
    observation_noise: float = Field(default=0.1, gt=0, description="Initial diagonal of R")
    train_noise: bool = Field(default=True, description="Optimise Q and R")
    train_inducing: bool = Field(default=True, description="Optimise inducing inputs Z")
    z_range: Tuple[float, float] = Field(default=(-2.0, 2.0), description="Initial range of Z")
    inducing_init_std: float = Field(default=0.1, gt=0, description="Initial std of q(U)")

    @model_validator(mode='after')
    def validate_dimensions(self):
        """C = [I 0] needs d_y <= d_x; coupling layers need d_x >= 2."""
        if self.obs_dim > self.state_dim:
            raise ValueError(f"obs_dim ({self.obs_dim}) cannot exceed state_dim ({self.state_dim})")
        if self.z_range[0] >= self.z_range[1]:
            raise ValueError("z_range must be increasing")
        if self.flow and self.state_dim < 2 and any(layer.is_coupling for layer in self.flow):
            raise ValueError("coupling layers need state_dim >= 2; use elementary flows for d_x = 1")
        return self

    @property
    def is_transformed(self) -> bool:
        return bool(self.flow)

    model_config = {"extra": "forbid"}


class InferenceSpec(BaseModel):
    """Inference-network architecture."""

    hidden_units: int = Field(default=32, ge=1, description="Backward recurrent encoder width")
    head_units: List[int] = Field(default_factory=lambda: [32, 32], description="Conditional head widths")
    init_std: float = Field(default=0.3, gt=0, description="Initial std of q(x_t | x_{t-1})")

    model_config = {"extra": "forbid"}


class ColumnSchema(BaseModel):
    """Column roles of an external CSV series."""

    observations: List[str] = Field(min_length=1, description="Observation columns y")
    controls: List[str] = Field(default_factory=list, description="Control-input columns u")
    time: Optional[str] = Field(default=None, description="Time column (checked, not used)")
    sequence: Optional[str] = Field(default=None, description="Column splitting rows into sequences")

    model_config = {"extra": "forbid"}


class DatasetSpec(BaseModel):
    """Where the data comes from and how it is prepared."""

    generator: Optional[Literal["kink", "kink_step", "lorenz"]] = Field(default=None)
    csv_path: Optional[str] = Field(default=None, description="External CSV series")
    columns: Optional[ColumnSchema] = Field(default=None)
    num_sequences: int = Field(default=30, ge=1)
    length: int = Field(default=20, ge=1, description="Sequence length T")
    dt: float = Field(default=0.02, gt=0, description="Lorenz discretisation step")
    seed: int = Field(default=0, description="Generator seed")
    standardize: bool = Field(default=False, description="Scale to zero mean / unit variance (training split)")
    test_length: int = Field(default=0, ge=0, description="Trailing observations held out for forecasting")
    chunk_length: Optional[int] = Field(default=None, ge=1, description="Cut long series into chunks of this length")

    @model_validator(mode='after')
    def validate_source(self):
        """Exactly one of generator / csv_path."""
        if (self.generator is None) == (self.csv_path is None):
            raise ValueError("dataset needs exactly one of 'generator' or 'csv_path'")
        if self.csv_path is not None and self.columns is None:
            raise ValueError("a CSV dataset needs a 'columns' schema")
        return self

    model_config = {"extra": "forbid"}


class TrainConfig(BaseModel):
    """Optimisation settings for joint (JO) or constrained (CO) training."""

    mode: Literal["joint", "constrained"] = Field(default="joint")
    epochs: int = Field(default=1500, ge=0)
    learning_rate: float = Field(default=0.01, gt=0)
    group_learning_rates: Dict[str, float] = Field(
        default_factory=dict,
        description="Learning rate per parameter-name prefix (e.g. 'vs.net.')"
    )
    kl_weight: Optional[Union[float, Literal["1/T"]]] = Field(
        default=None,
        description="JO only: scale of the KL terms; '1/T' uses the sequence length"
    )
    r0: Optional[float] = Field(
        default=None,
        description="CO only: target reconstruction; null estimates it from a Gaussian fit, -inf disables"
    )
    alpha: float = Field(default=0.5, ge=0, lt=1, description="Moving-average weight")
    eta: float = Field(default=0.001, gt=0, description="Multiplier learning rate")
    beta_init: float = Field(default=1.0, gt=0, description="Initial Lagrange multiplier")
    seed: int = Field(default=0)
    num_mc_samples: int = Field(default=1, ge=1, description="Samples of f per step in the state term")
    log_every: int = Field(default=100, ge=1)

    @field_validator('kl_weight', mode='before')
    @classmethod
    def normalize_kl_weight(cls, v):
        """Accept '1/T' in any spacing/case and positive numbers."""
        if v is None:
            return None
        if isinstance(v, str):
            cleaned = v.replace(" ", "").upper()
            if cleaned == "1/T":
                return "1/T"
            v = float(cleaned)
        if v <= 0:
            raise ValueError("kl_weight must be positive")
        return float(v)

    @field_validator('r0', mode='before')
    @classmethod
    def normalize_r0(cls, v):
        """Allow the string '-inf' from YAML."""
        if isinstance(v, str):
            return float(v.strip().lower())
        return v

    @field_validator('group_learning_rates')
    @classmethod
    def validate_group_rates(cls, v: Dict[str, float]) -> Dict[str, float]:
        if any(rate <= 0 for rate in v.values()):
            raise ValueError("group learning rates must be positive")
        return v

    @model_validator(mode='after')
    def validate_mode(self):
        """kl_weight belongs to JO, r0 to CO."""
        if self.mode == "constrained" and self.kl_weight is not None:
            raise ValueError("kl_weight is a joint-mode setting")
        if self.mode == "joint" and self.r0 is not None:
            raise ValueError("r0 is a constrained-mode setting")
        return self

    def resolved_kl_weight(self, sequence_length: int) -> float:
        if self.kl_weight is None:
            return 1.0
        if self.kl_weight == "1/T":
            return 1.0 / float(sequence_length)
        return float(self.kl_weight)

    model_config = {"extra": "forbid", "ser_json_inf_nan": "strings"}


class EvaluationSpec(BaseModel):
    """Metric settings."""

    grid_points: int = Field(default=200, ge=2)
    grid_range: Optional[Tuple[float, float]] = Field(
        default=None,
        description="Transition-MSE grid; default depends on the generator"
    )
    forecast_horizon: int = Field(default=20, ge=0)
    num_mc_samples: int = Field(default=1, ge=1, description="Samples of f per step for the reported ELBO")

    model_config = {"extra": "forbid"}


class RunConfig(BaseModel):
    """A complete, serialisable experiment description."""

    name: str = Field(default="run")
    dataset: DatasetSpec
    model: ModelSpec = Field(default_factory=ModelSpec)
    inference: InferenceSpec = Field(default_factory=InferenceSpec)
    trainer: TrainConfig = Field(default_factory=TrainConfig)
    evaluation: EvaluationSpec = Field(default_factory=EvaluationSpec)
    output_dir: Optional[str] = Field(default=None, description="Artifact directory (default: <output root>/<name>)")
    seed: int = Field(default=0, description="Seed for model initialisation")

    @model_validator(mode='after')
    def validate_dataset_dims(self):
        """Generators fix the observation dimension."""
        expected = {"kink": 1, "kink_step": 1, "lorenz": 3}.get(self.dataset.generator or "")
        if expected is not None and self.model.obs_dim != expected:
            raise ValueError(f"generator '{self.dataset.generator}' produces d_y = {expected}, model has {self.model.obs_dim}")
        if self.dataset.columns is not None:
            if len(self.dataset.columns.observations) != self.model.obs_dim:
                raise ValueError("number of observation columns differs from model.obs_dim")
            if len(self.dataset.columns.controls) != self.model.control_dim:
                raise ValueError("number of control columns differs from model.control_dim")
        return self

    def fingerprint(self) -> str:
        """Short stable hash of the resolved configuration."""
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    model_config = {"extra": "forbid", "ser_json_inf_nan": "strings"}


class ElboBreakdown(BaseModel):
    """The five ELBO terms and their signed total."""

    kl_x0: float
    kl_u: float
    entropy: float
    state_recon: float
    data_recon: float
    total: float

    @classmethod
    def from_terms(cls, kl_x0: float, kl_u: float, entropy: float, state_recon: float, data_recon: float) -> "ElboBreakdown":
        total = -kl_x0 - kl_u + entropy + state_recon + data_recon
        return cls(kl_x0=kl_x0, kl_u=kl_u, entropy=entropy, state_recon=state_recon,
                   data_recon=data_recon, total=total)

    @model_validator(mode='after')
    def validate_signs(self):
        """KL terms are non-negative (up to rounding); total is the signed sum."""
        if self.kl_x0 < -1e-8 or self.kl_u < -1e-8:
            raise ValueError(f"negative KL term (kl_x0={self.kl_x0}, kl_u={self.kl_u})")
        expected = -self.kl_x0 - self.kl_u + self.entropy + self.state_recon + self.data_recon
        if not math.isclose(self.total, expected, rel_tol=1e-12, abs_tol=1e-9):
            raise ValueError(f"total {self.total} differs from the signed sum {expected}")
        return self

    def to_dict(self) -> dict:
        return self.model_dump()

    model_config = {"extra": "forbid"}


class MetricReport(BaseModel):
    """A metric over one or more seeds."""

    name: str
    value: float = Field(description="Headline value (best over seeds for errors, else mean)")
    per_seed_values: List[float] = Field(min_length=1)
    mean: float
    std: float = Field(ge=0)
    config_fingerprint: Optional[str] = None
    details: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_values(
        cls,
        name: str,
        values: List[float],
        fingerprint: Optional[str] = None,
        headline: Literal["min", "mean"] = "mean",
        details: Optional[Dict[str, Any]] = None
    ) -> "MetricReport":
        """Aggregate per-seed values (population std)."""
        array = np.asarray(values, dtype=np.float64)
        value = float(array.min()) if headline == "min" else float(array.mean())
        return cls(
            name=name,
            value=value,
            per_seed_values=[float(v) for v in array],
            mean=float(array.mean()),
            std=float(array.std()),
            config_fingerprint=fingerprint,
            details=details or {},
        )

    @model_validator(mode='after')
    def validate_aggregates(self):
        """mean/std must agree with the per-seed values."""
        array = np.asarray(self.per_seed_values, dtype=np.float64)
        if not math.isclose(self.mean, float(array.mean()), rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError("mean is inconsistent with per-seed values")
        if not math.isclose(self.std, float(array.std()), rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError("std is inconsistent with per-seed values")
        return self

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")

    model_config = {"extra": "forbid"}

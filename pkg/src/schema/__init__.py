"""Configuration models, ELBO breakdown and metric reports."""

from .models import (
    KernelSpec, FlowLayerSpec, ModelSpec, InferenceSpec, ColumnSchema, DatasetSpec,
    TrainConfig, EvaluationSpec, RunConfig, ElboBreakdown, MetricReport, default_flow_specs,
)
from .loader import (
    load_run_config, dump_run_config, apply_overrides, resolve_config_path,
    list_presets, output_root, run_directory,
)

__all__ = [
    'KernelSpec', 'FlowLayerSpec', 'ModelSpec', 'InferenceSpec', 'ColumnSchema', 'DatasetSpec',
    'TrainConfig', 'EvaluationSpec', 'RunConfig', 'ElboBreakdown', 'MetricReport', 'default_flow_specs',
    'load_run_config', 'dump_run_config', 'apply_overrides', 'resolve_config_path',
    'list_presets', 'output_root', 'run_directory',
]

"""Pipeline module for orchestrating full experiments."""

from .experiment import (
    ExperimentPipeline, ExperimentResult, build_components, restore_components, all_parameters,
)

__all__ = [
    'ExperimentPipeline', 'ExperimentResult', 'build_components', 'restore_components', 'all_parameters',
]

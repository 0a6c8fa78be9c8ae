"""Metrics and filtering baselines."""

from .filters import FilterResult, kalman_filter, ekf, state_mse
from .metrics import (
    evaluation_grid, posterior_transition, transition_mse, forecast_means, forecast_rmse,
    inferred_state_mse, observation_mse, write_transition_csv, write_reports,
)

__all__ = [
    'FilterResult', 'kalman_filter', 'ekf', 'state_mse',
    'evaluation_grid', 'posterior_transition', 'transition_mse', 'forecast_means', 'forecast_rmse',
    'inferred_state_mse', 'observation_mse', 'write_transition_csv', 'write_reports',
]

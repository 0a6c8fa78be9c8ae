"""
Transition-function MSE, k-step forecast RMSE and state-estimation error.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Tuple, Union

import numpy as np

from src.flows.stack import flow_forward
from src.gp.sparse import marginal_moments
from src.inference.network import VariationalState
from src.inference.variational import infer_state_means
from src.model.ssm import TgpssmModel
from src.model.trajectory import FLOAT_FORMAT
from src.schema.models import MetricReport
from src.utils.errors import ContractViolation
from .filters import state_mse


def evaluation_grid(grid_range: Tuple[float, float], points: int = 200) -> np.ndarray:
    """Uniform 1-D grid as a points x 1 array."""
    low, high = grid_range
    if not low < high or points < 2:
        raise ContractViolation(f"bad grid {grid_range} with {points} points")
    return np.linspace(low, high, points).reshape(-1, 1)


def _as_inputs(model: TgpssmModel, grid: Any) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim == 1:
        grid = grid.reshape(-1, 1)
    if grid.shape[1] != model.gp.input_dim:
        raise ContractViolation(f"grid points must have {model.gp.input_dim} coordinates, got {grid.shape[1]}")
    return grid


def posterior_transition(model: TgpssmModel, grid: Any) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Posterior-mean transition and a +/- 2 sigma band at grid points.

    The mean is G(mean of q(f)); the band pushes mean -/+ 2 std of q(f)
    through the flow, which is monotone per dimension for elementary flows.

    Returns:
        (mean, lower, upper), each G x d_x
    """
    model = model.detached()
    X = _as_inputs(model, grid)
    mean, var = marginal_moments(model.gp, X)
    spread = 2.0 * np.sqrt(var)
    return (
        np.asarray(flow_forward(model.flow, mean)),
        np.asarray(flow_forward(model.flow, mean - spread)),
        np.asarray(flow_forward(model.flow, mean + spread)),
    )


def transition_mse(model: TgpssmModel, true_fn: Callable[[np.ndarray], np.ndarray], grid: Any) -> float:
    """Mean over the grid of (posterior-mean transition - true_fn)^2."""
    X = _as_inputs(model, grid)
    predicted, _, _ = posterior_transition(model, X)
    reference = np.asarray(true_fn(X[:, :model.state_dim]), dtype=np.float64).reshape(predicted.shape)
    return float(np.mean((predicted - reference) ** 2))


def forecast_means(
    model: TgpssmModel,
    vs: VariationalState,
    y_train: Any,
    horizon: int,
    controls_train: Optional[Any] = None,
    controls_future: Optional[Any] = None,
    x_start: Optional[Any] = None
) -> np.ndarray:
    """
    Mean rollout of the learned dynamics after the training series.

    Starts from the mean of q at the last training step (or ``x_start``)
    and iterates x <- G(mean of q(f) at x), emitting C x.

    Returns:
        horizon x d_y predicted observations
    """
    model = model.detached()
    if x_start is None:
        x = infer_state_means(vs, y_train, controls_train)[0, -1]
    else:
        x = np.asarray(x_start, dtype=np.float64).reshape(model.state_dim)
    if model.control_dim and horizon > 0:
        if controls_future is None or len(controls_future) < horizon:
            raise ContractViolation(f"forecasting needs {horizon} future control input(s)")
        controls_future = np.asarray(controls_future, dtype=np.float64).reshape(-1, model.control_dim)

    predictions = []
    for t in range(horizon):
        u = None if not model.control_dim else controls_future[t:t + 1]
        mean, _ = marginal_moments(model.gp, model.gp_inputs(x[None], u))
        x = np.asarray(flow_forward(model.flow, mean))[0]
        predictions.append(model.C @ x)
    return np.array(predictions).reshape(horizon, model.obs_dim)


def forecast_rmse(
    model: TgpssmModel,
    vs: VariationalState,
    y_train: Any,
    y_test: Any,
    horizon: Optional[int] = None,
    controls_train: Optional[Any] = None,
    controls_test: Optional[Any] = None,
    x_start: Optional[Any] = None
) -> float:
    """
    RMSE of a ``horizon``-step mean forecast against held-out observations.

    Values are in whatever units the model was trained in (standardised
    units for standardised data). An empty horizon scores 0.
    """
    y_test = np.asarray(y_test, dtype=np.float64).reshape(-1, model.obs_dim)
    k = len(y_test) if horizon is None else horizon
    if k > len(y_test):
        raise ContractViolation(f"horizon {k} exceeds the {len(y_test)} held-out observations")
    if k == 0:
        return 0.0
    predicted = forecast_means(model, vs, y_train, k, controls_train, controls_test, x_start)
    return float(np.sqrt(np.mean((predicted - y_test[:k]) ** 2)))


def inferred_state_mse(
    vs: VariationalState,
    y: Any,
    states: Any,
    controls: Optional[Any] = None
) -> float:
    """MSE of the mean path of q against true states x_{1:T}."""
    means = infer_state_means(vs, y, controls)[0, 1:]
    return state_mse(means, states)


def observation_mse(y: Any, states: Any, C: Optional[Any] = None) -> float:
    """Raw measurement error: mean of (y_t - C x_t)^2."""
    y = np.asarray(y, dtype=np.float64)
    states = np.asarray(states, dtype=np.float64)
    if states.shape[0] == y.shape[0] + 1:
        states = states[1:]
    C = np.eye(y.shape[1], states.shape[1]) if C is None else np.asarray(C)
    return float(np.mean((y - states @ C.T) ** 2))


def write_transition_csv(
    path: Union[str, Path],
    grid: Any,
    true_values: Optional[Any],
    mean: Any,
    lower: Any,
    upper: Any
) -> Path:
    """Plot-ready columns x, f_true, f_mean, f_lower, f_upper (first state dimension)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = [np.asarray(grid).reshape(len(mean), -1)[:, 0]]
    columns.append(None if true_values is None else np.asarray(true_values).reshape(len(mean), -1)[:, 0])
    columns += [np.asarray(a).reshape(len(mean), -1)[:, 0] for a in (mean, lower, upper)]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["x", "f_true", "f_mean", "f_lower", "f_upper"])
        for i in range(len(mean)):
            writer.writerow(["" if col is None else FLOAT_FORMAT.format(col[i]) for col in columns])
    return path


def write_reports(reports: Iterable[MetricReport], path: Union[str, Path]) -> Path:
    """Serialise metric reports as a JSON object keyed by metric name."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as handle:
        json.dump({report.name: report.to_dict() for report in reports}, handle, indent=2)
    return path

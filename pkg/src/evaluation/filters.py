"""
Kalman filter for linear-Gaussian SSMs and the extended Kalman filter.

Both use the convention x_0 ~ N(m0, P0), x_t = F(x_{t-1}) + v_t,
y_t = C x_t + e_t for t = 1..T.
"""

from __future__ import annotations

from typing import Any, Callable, Optional

import numpy as np

from src.autodiff import jacobian
from src.gp.conditionals import gaussian_log_density
from src.utils.errors import ContractViolation, DecompositionError, FilterDivergenceError
from src.utils.logger import get_logger

logger = get_logger()


class FilterResult:
    """
    Filtered moments.

    Attributes:
        means: T x d_x filtered means E[x_t | y_{1:t}]
        covariances: T x d_x x d_x filtered covariances
        log_evidence: sum_t log p(y_t | y_{1:t-1})
    """

    def __init__(self, means: np.ndarray, covariances: np.ndarray, log_evidence: float):
        self.means = means
        self.covariances = covariances
        self.log_evidence = log_evidence

    def state_mse(self, states: Any) -> float:
        """MSE against true states x_{1:T} (or x_{0:T}, the first row is then dropped)."""
        return state_mse(self.means, states)

    def to_dict(self) -> dict:
        return {
            "means": self.means.tolist(),
            "log_evidence": self.log_evidence,
        }


def state_mse(estimates: Any, states: Any) -> float:
    """Mean over steps and dimensions of (estimate - truth)^2."""
    estimates = np.asarray(estimates, dtype=np.float64)
    states = np.asarray(states, dtype=np.float64)
    if states.shape[0] == estimates.shape[0] + 1:
        states = states[1:]
    if states.shape != estimates.shape:
        raise ContractViolation(f"estimates {estimates.shape} and states {states.shape} differ in shape")
    return float(np.mean((estimates - states) ** 2))


def _check_pd(P: np.ndarray, name: str, step: int) -> None:
    if not np.all(np.isfinite(P)):
        raise FilterDivergenceError(f"non-finite covariance at step {step}", node=name)
    try:
        np.linalg.cholesky(0.5 * (P + P.T))
    except np.linalg.LinAlgError as exc:
        raise FilterDivergenceError(f"covariance lost positive definiteness at step {step}", node=name) from exc


def _update(m_pred, P_pred, y_t, C, R, step):
    S = C @ P_pred @ C.T + R
    _check_pd(S, "innovation", step)
    try:
        log_lik = float(gaussian_log_density(y_t, C @ m_pred, S, name="innovation"))
    except DecompositionError as exc:
        raise FilterDivergenceError(f"innovation covariance not positive definite at step {step}") from exc
    K = np.linalg.solve(S, C @ P_pred).T
    m = m_pred + K @ (y_t - C @ m_pred)
    I_KC = np.eye(len(m)) - K @ C
    # Joseph form keeps P symmetric positive semi-definite
    P = I_KC @ P_pred @ I_KC.T + K @ R @ K.T
    _check_pd(P, "filtered", step)
    return m, P, log_lik


def _as_inputs(y, C, R, m0, P0):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    R = np.atleast_2d(np.asarray(R, dtype=np.float64))
    m0 = np.atleast_1d(np.asarray(m0, dtype=np.float64))
    P0 = np.atleast_2d(np.asarray(P0, dtype=np.float64))
    if y.shape[1] != C.shape[0] or C.shape[1] != m0.shape[0]:
        raise ContractViolation(f"inconsistent shapes: y {y.shape}, C {C.shape}, m0 {m0.shape}")
    return y, C, R, m0, P0


def kalman_filter(A: Any, Q: Any, C: Any, R: Any, y: Any, m0: Any, P0: Any) -> FilterResult:
    """
    Exact filter for x_t = A x_{t-1} + N(0, Q), y_t = C x_t + N(0, R).

    Raises:
        FilterDivergenceError: A covariance stops being positive definite
    """
    y, C, R, m0, P0 = _as_inputs(y, C, R, m0, P0)
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    return _run_filter(lambda m: A @ m, lambda m: A, Q, C, R, y, m0, P0)


def _run_filter(transition, transition_jacobian, Q, C, R, y, m, P) -> FilterResult:
    means, covariances = [], []
    log_evidence = 0.0
    for t in range(y.shape[0]):
        F = np.atleast_2d(transition_jacobian(m))
        m_pred = np.asarray(transition(m), dtype=np.float64).reshape(-1)
        P_pred = F @ P @ F.T + Q
        _check_pd(P_pred, "predicted", t + 1)
        m, P, log_lik = _update(m_pred, P_pred, y[t], C, R, t + 1)
        log_evidence += log_lik
        means.append(m)
        covariances.append(P)
    return FilterResult(np.array(means), np.array(covariances), log_evidence)


def ekf(
    transition: Callable[[Any], Any],
    Q: Any,
    R: Any,
    C: Any,
    y: Any,
    m0: Any,
    P0: Any,
    transition_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
) -> FilterResult:
    """
    Extended Kalman filter.

    Args:
        transition: x_{t-1} -> mean of x_t; must accept tape variables when
                    no Jacobian is supplied
        Q: Process-noise covariance
        R: Observation-noise covariance
        C: Linear emission matrix
        y: T x d_y observations
        m0: Initial mean
        P0: Initial covariance
        transition_jacobian: Optional analytic Jacobian; autodiff otherwise

    Returns:
        FilterResult (the log evidence is the EKF approximation)

    Raises:
        FilterDivergenceError: A covariance stops being positive definite
    """
    y, C, R, m0, P0 = _as_inputs(y, C, R, m0, P0)
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    if transition_jacobian is None:
        def transition_jacobian(m):
            return jacobian(transition, m)
    result = _run_filter(transition, transition_jacobian, Q, C, R, y, m0, P0)
    logger.debug(f"EKF over {y.shape[0]} steps, log evidence {result.log_evidence:.4f}")
    return result

"""Joint and augmented-prior log densities of the generative model."""

from __future__ import annotations

from typing import Any

import numpy as np

from src.flows.stack import flow_inverse, flow_log_det_jacobian
from src.gp.conditionals import gaussian_log_density, gp_conditional
from src.gp.kernels import JITTER, kernel_matrix
from src.utils.errors import ContractViolation
from .ssm import TgpssmModel
from .trajectory import Trajectory


def _diag_log_density(x: np.ndarray, mean: np.ndarray, var: np.ndarray) -> float:
    r = x - mean
    return float(-0.5 * np.sum(np.log(2.0 * np.pi * var) + r * r / var))


def transformed_gp_log_density(model: TgpssmModel, inputs: np.ndarray, f_tilde: np.ndarray) -> float:
    """
    log p(F~) of warped function values at the given GP inputs.

    F = G^{-1}(F~) has independent GP columns; the change of variables
    subtracts sum_t log|det dG/df (f_t)|.
    """
    model = model.detached()
    f = flow_inverse(model.flow, f_tilde)
    n = inputs.shape[0]
    total = 0.0
    for d, kernel in enumerate(model.gp.kernels):
        K = kernel_matrix(kernel, inputs, inputs) + JITTER * np.eye(n)
        total += float(gaussian_log_density(f[:, d], np.zeros(n), K, name=f"prior_F[{d}]"))
    return total - float(np.sum(flow_log_det_jacobian(model.flow, f)))


def joint_log_density(model: TgpssmModel, trajectory: Trajectory) -> float:
    """
    log p(x_{0:T}, f~_{1:T}, y_{1:T}).

    Args:
        model: TGPSSM
        trajectory: Complete trajectory with states, observations and f_tilde

    Returns:
        log p(x_0) + log p(f~_{1:T}) + sum_t [log N(x_t | f~_t, Q) + log N(y_t | C x_t, R)]
    """
    if trajectory.states is None or trajectory.observations is None or trajectory.f_tilde is None:
        raise ContractViolation("joint_log_density needs states, observations and f_tilde")
    if trajectory.state_dim != model.state_dim or trajectory.obs_dim != model.obs_dim:
        raise ContractViolation(
            f"trajectory dimensions ({trajectory.state_dim}, {trajectory.obs_dim}) do not match "
            f"model ({model.state_dim}, {model.obs_dim})"
        )
    model = model.detached()
    X, Y, F_tilde = trajectory.states, trajectory.observations, trajectory.f_tilde
    inputs = X[:-1] if trajectory.controls is None else np.concatenate([X[:-1], trajectory.controls], axis=1)
    q, r = np.diag(model.Q), np.diag(model.R)

    log_x0 = _diag_log_density(X[0], np.zeros(model.state_dim), np.ones(model.state_dim))
    log_f = transformed_gp_log_density(model, inputs, F_tilde)
    log_x = sum(_diag_log_density(X[t + 1], F_tilde[t], q) for t in range(trajectory.length))
    log_y = sum(_diag_log_density(Y[t], model.C @ X[t + 1], r) for t in range(trajectory.length))
    return log_x0 + log_f + log_x + log_y


def augmented_prior_log_density(model: TgpssmModel, inputs: Any, f_tilde: Any, u_tilde: Any) -> float:
    """
    log p(F~, U~) assembled as p(F | U) J_f * p(U) J_u.

    Args:
        model: TGPSSM whose inducing inputs Z index U
        inputs: n x D GP inputs of F
        f_tilde: n x d_x warped function values
        u_tilde: M x d_x warped inducing values
    """
    model = model.detached()
    gp = model.gp
    inputs = np.asarray(inputs, dtype=np.float64)
    F = flow_inverse(model.flow, f_tilde)
    U = flow_inverse(model.flow, u_tilde)
    n, M = inputs.shape[0], gp.num_inducing
    total = 0.0
    for d, kernel in enumerate(gp.kernels):
        cond = gp_conditional(kernel, gp.Z, U[:, d], 0.0, inputs)
        total += float(gaussian_log_density(F[:, d], cond.mean, cond.covariance + JITTER * np.eye(n), name=f"F|U[{d}]"))
        K_zz = kernel_matrix(kernel, gp.Z, gp.Z) + JITTER * np.eye(M)
        total += float(gaussian_log_density(U[:, d], np.zeros(M), K_zz, name=f"U[{d}]"))
    total -= float(np.sum(flow_log_det_jacobian(model.flow, F)))
    total -= float(np.sum(flow_log_det_jacobian(model.flow, U)))
    return total


def joint_prior_log_density_direct(model: TgpssmModel, inputs: Any, f_tilde: Any, u_tilde: Any) -> float:
    """
    log p(F~, U~) by change of variables on the joint Gaussian p(F, U).

    Agrees with ``augmented_prior_log_density`` up to rounding.
    """
    model = model.detached()
    gp = model.gp
    inputs = np.asarray(inputs, dtype=np.float64)
    FU_tilde = np.concatenate([np.asarray(f_tilde, dtype=np.float64), np.asarray(u_tilde, dtype=np.float64)], axis=0)
    FU = flow_inverse(model.flow, FU_tilde)
    points = np.concatenate([inputs, np.asarray(gp.Z)], axis=0)
    N = points.shape[0]
    total = 0.0
    for d, kernel in enumerate(gp.kernels):
        K = kernel_matrix(kernel, points, points) + JITTER * np.eye(N)
        total += float(gaussian_log_density(FU[:, d], np.zeros(N), K, name=f"FU[{d}]"))
    return total - float(np.sum(flow_log_det_jacobian(model.flow, FU)))

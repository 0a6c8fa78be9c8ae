"""
Prior (and posterior) trajectory sampling.

Both samplers draw from a single ``numpy.random.Generator`` in a fixed
order, so a length-t run is a prefix of a length-T run with the same seed:
x_0, then (for the sparse sampler) U, then per step f_t, process noise and
observation noise.
"""

from __future__ import annotations

from typing import Any, Optional

import numpy as np
from scipy import linalg as sla

from src.flows.stack import flow_forward
from src.gp.conditionals import gp_conditional
from src.gp.kernels import kernel_diag, kernel_matrix
from src.utils.errors import ContractViolation
from .ssm import TgpssmModel
from .trajectory import Trajectory


def _check_length(T: int) -> None:
    if T < 1:
        raise ContractViolation("T must be at least 1")


def _controls(model: TgpssmModel, T: int, controls: Optional[Any]) -> Optional[np.ndarray]:
    if model.control_dim == 0:
        return None
    if controls is None:
        raise ContractViolation(f"model expects {model.control_dim} control input(s) per step")
    controls = np.asarray(controls, dtype=np.float64).reshape(T, model.control_dim)
    return controls


def _emit(model: TgpssmModel, f_t: np.ndarray, rng: np.random.Generator):
    f_tilde = flow_forward(model.flow, f_t.reshape(1, -1))[0]
    x_t = f_tilde + np.sqrt(np.diag(model.Q)) * rng.standard_normal(model.state_dim)
    y_t = model.C @ x_t + np.sqrt(np.diag(model.R)) * rng.standard_normal(model.obs_dim)
    return f_tilde, x_t, y_t


def sample_prior_exact(
    model: TgpssmModel,
    T: int,
    seed: int,
    x0: Optional[Any] = None,
    controls: Optional[Any] = None
) -> Trajectory:
    """
    Sample a trajectory from the full GP prior.

    Each f_t is drawn from the noiseless GP conditional given every earlier
    (GP input, f) pair, so the cost grows cubically with T.

    Args:
        model: TGPSSM (the flow may be None)
        T: Number of steps
        seed: Seed of the random generator
        x0: Fixed initial state (default: drawn from N(0, I))
        controls: T x d_u control inputs when the model has controls

    Returns:
        Trajectory with states, observations, f and f_tilde
    """
    _check_length(T)
    model = model.detached()
    u = _controls(model, T, controls)
    rng = np.random.default_rng(seed)
    d_x = model.state_dim

    x_prev = rng.standard_normal(d_x) if x0 is None else np.asarray(x0, dtype=np.float64).reshape(d_x)
    states, observations, fs, f_tildes, inputs = [x_prev], [], [], [], []
    for t in range(T):
        inp = x_prev if u is None else np.concatenate([x_prev, u[t]])
        train_X = np.array(inputs).reshape(len(inputs), -1) if inputs else np.zeros((0, inp.shape[0]))
        z = rng.standard_normal(d_x)
        f_t = np.empty(d_x)
        for d, kernel in enumerate(model.gp.kernels):
            train_f = np.array([f[d] for f in fs])
            dist = gp_conditional(kernel, train_X, train_f, 0.0, inp.reshape(1, -1))
            f_t[d] = dist.mean[0] + np.sqrt(max(dist.variance[0], 0.0)) * z[d]
        f_tilde, x_t, y_t = _emit(model, f_t, rng)
        inputs.append(inp)
        fs.append(f_t)
        f_tildes.append(f_tilde)
        states.append(x_t)
        observations.append(y_t)
        x_prev = x_t

    return Trajectory(states, observations, controls=u, f=fs, f_tilde=f_tildes)


def sample_prior_sparse(
    model: TgpssmModel,
    T: int,
    seed: int,
    from_posterior: bool = False,
    x0: Optional[Any] = None,
    controls: Optional[Any] = None
) -> Trajectory:
    """
    Sample a trajectory through the inducing points.

    U is drawn once, from p(U) = N(0, K_ZZ) or, with ``from_posterior``,
    from q(U) = N(m, S); then f_t ~ p(f_t | x_{t-1}, U) at O(M^2) per step.
    """
    _check_length(T)
    model = model.detached()
    u = _controls(model, T, controls)
    rng = np.random.default_rng(seed)
    gp = model.gp
    d_x, M = model.state_dim, gp.num_inducing

    x_prev = rng.standard_normal(d_x) if x0 is None else np.asarray(x0, dtype=np.float64).reshape(d_x)
    factors = gp.prior_factors()
    alphas = []
    for d in range(d_x):
        eps = rng.standard_normal(M)
        if from_posterior:
            U_d = gp.q_mean[d] + gp.q_factor(d) @ eps
        else:
            U_d = factors[d] @ eps
        alphas.append(sla.solve_triangular(factors[d], U_d, lower=True))

    states, observations, fs, f_tildes = [x_prev], [], [], []
    for t in range(T):
        inp = (x_prev if u is None else np.concatenate([x_prev, u[t]])).reshape(1, -1)
        z = rng.standard_normal(d_x)
        f_t = np.empty(d_x)
        for d, kernel in enumerate(gp.kernels):
            a = sla.solve_triangular(factors[d], kernel_matrix(kernel, gp.Z, inp)[:, 0], lower=True)
            var = float(kernel_diag(kernel, inp)[0] - a @ a)
            f_t[d] = a @ alphas[d] + np.sqrt(max(var, 0.0)) * z[d]
        f_tilde, x_t, y_t = _emit(model, f_t, rng)
        fs.append(f_t)
        f_tildes.append(f_tilde)
        states.append(x_t)
        observations.append(y_t)
        x_prev = x_t

    return Trajectory(states, observations, controls=u, f=fs, f_tilde=f_tildes)


def sample_inducing_values(model: TgpssmModel, rng: np.random.Generator) -> np.ndarray:
    """Draw U ~ p(U) as an M x d_x array (one column per output)."""
    gp = model.detached().gp
    factors = gp.prior_factors()
    return np.stack([factors[d] @ rng.standard_normal(gp.num_inducing) for d in range(gp.output_dim)], axis=1)



"""
Reparametrized sampling from the Markov-structured q(x_{0:T}).

Sequences are processed as batches of equal length: observations are
B x T x d_y arrays and states are carried as B x d_x rows per step.
"""

from __future__ import annotations

from typing import Any, List, Optional, Tuple

import numpy as np

from src.autodiff import ops
from src.gp.conditionals import gaussian_log_density
from src.model.trajectory import Trajectory
from src.utils.errors import ContractViolation
from .network import VariationalState


def as_batch(y: Any, controls: Optional[Any] = None) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Promote T x d arrays to 1 x T x d batches and check lengths agree."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    if y.ndim == 2:
        y = y[None]
    if y.ndim != 3 or y.shape[1] < 1:
        raise ContractViolation(f"observations must be T x d_y or B x T x d_y with T >= 1, got {y.shape}")
    if controls is not None:
        controls = np.asarray(controls, dtype=np.float64)
        if controls.ndim == 2:
            controls = controls[None]
        if controls.shape[:2] != y.shape[:2]:
            raise ContractViolation(f"controls shape {controls.shape} does not match observations {y.shape}")
    return y, controls


class ElboNoise:
    """
    Standard-normal draws for one ELBO evaluation.

    Drawn in the order eps0, then per step (eps_t, f_eps_t).

    Attributes:
        eps0: B x d_x
        eps: T x B x d_x
        f_eps: T x n x B x d_x
    """

    def __init__(self, eps0: np.ndarray, eps: np.ndarray, f_eps: np.ndarray):
        self.eps0 = eps0
        self.eps = eps
        self.f_eps = f_eps

    @classmethod
    def draw(cls, rng: np.random.Generator, batch: int, T: int, state_dim: int, num_samples: int = 1) -> "ElboNoise":
        if num_samples < 1:
            raise ContractViolation("number of Monte-Carlo samples must be at least 1")
        eps0 = rng.standard_normal((batch, state_dim))
        eps = np.empty((T, batch, state_dim))
        f_eps = np.empty((T, num_samples, batch, state_dim))
        for t in range(T):
            eps[t] = rng.standard_normal((batch, state_dim))
            f_eps[t] = rng.standard_normal((num_samples, batch, state_dim))
        return cls(eps0, eps, f_eps)

    @classmethod
    def zeros(cls, batch: int, T: int, state_dim: int) -> "ElboNoise":
        return cls(np.zeros((batch, state_dim)), np.zeros((T, batch, state_dim)), np.zeros((T, 1, batch, state_dim)))

    @property
    def num_samples(self) -> int:
        return int(self.f_eps.shape[1])


class PathSample:
    """One sampled batch of state paths with the per-step moments of q."""

    def __init__(self, states: List[Any], omegas: List[Any], sigmas: List[Any]):
        self.states = states
        self.omegas = omegas
        self.sigmas = sigmas

    @property
    def length(self) -> int:
        return len(self.omegas)

    def stacked_states(self):
        """(T+1) x B x d_x."""
        return ops.stack(self.states, axis=0)

    def stacked_omegas(self):
        return ops.stack(self.omegas, axis=0)

    def stacked_sigmas(self):
        return ops.stack(self.sigmas, axis=0)

    def to_trajectory(self, index: int = 0) -> Trajectory:
        """States of one sequence of the batch as a Trajectory (numpy)."""
        states = np.stack([ops.value_of(x)[index] for x in self.states])
        return Trajectory(states=states)


def sample_q_trajectory(
    vs: VariationalState,
    y: Any,
    seed: Optional[int] = None,
    controls: Optional[Any] = None,
    noise: Optional[ElboNoise] = None
) -> PathSample:
    """
    Draw x_{0:T} ~ q by reparametrization.

    x_0 = m0 + L0 eps_0 and x_t = omega_t + sqrt(Sigma_t) eps_t, where
    (omega_t, Sigma_t) come from the inference network applied to x_{t-1}
    and the backward context h_t.

    Args:
        vs: Variational state (may hold tape variables)
        y: T x d_y or B x T x d_y observations
        seed: Seed used when ``noise`` is not given
        controls: Matching control inputs, if any
        noise: Pre-drawn standard-normal noise

    Returns:
        PathSample with T+1 states and T (omega, Sigma) pairs
    """
    y, controls = as_batch(y, controls)
    B, T, _ = y.shape
    if noise is None:
        noise = ElboNoise.draw(np.random.default_rng(seed), B, T, vs.state_dim)

    contexts = vs.net.encode(y, controls)
    x = ops.add(vs.m0, ops.matmul(noise.eps0, ops.transpose(vs.L0())))
    states, omegas, sigmas = [x], [], []
    for t in range(T):
        omega, sigma = vs.net.step(x, contexts[t])
        x = ops.add(omega, ops.mul(ops.sqrt(sigma), noise.eps[t]))
        states.append(x)
        omegas.append(omega)
        sigmas.append(sigma)
    return PathSample(states, omegas, sigmas)


def infer_state_means(vs: VariationalState, y: Any, controls: Optional[Any] = None) -> np.ndarray:
    """
    Mean recursion of q: x_0 = m0, x_t = omega(x_{t-1}, h_t).

    Returns:
        B x (T+1) x d_x array (B = 1 for a single sequence)
    """
    y, controls = as_batch(y, controls)
    B, T, _ = y.shape
    path = sample_q_trajectory(vs.detached(), y, controls=controls, noise=ElboNoise.zeros(B, T, vs.state_dim))
    return np.swapaxes(np.asarray(path.stacked_states()), 0, 1)


def log_q_trajectory(vs: VariationalState, y: Any, states: Any, controls: Optional[Any] = None) -> np.ndarray:
    """
    log q(x_{0:T}) = log q(x_0) + sum_t log q(x_t | x_{t-1}) for given paths.

    Args:
        vs: Variational state
        y: T x d_y or B x T x d_y observations
        states: (T+1) x d_x or B x (T+1) x d_x paths

    Returns:
        Length-B array of log densities
    """
    y, controls = as_batch(y, controls)
    vs = vs.detached()
    states = np.asarray(states, dtype=np.float64)
    if states.ndim == 2:
        states = states[None]
    B, T, _ = y.shape
    if states.shape[:2] != (B, T + 1):
        raise ContractViolation(f"states shape {states.shape} does not match observations {y.shape}")

    L0 = vs.L0()
    cov0 = L0 @ L0.T
    out = np.array([float(gaussian_log_density(states[b, 0], vs.m0, cov0, name="q(x0)")) for b in range(B)])
    contexts = vs.net.encode(y, controls)
    for t in range(T):
        omega, sigma = vs.net.step(states[:, t], contexts[t])
        r = states[:, t + 1] - omega
        out += -0.5 * np.sum(np.log(2.0 * np.pi * sigma) + r * r / sigma, axis=-1)
    return out

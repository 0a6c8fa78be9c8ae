"""The TGPSSM generative model."""

from __future__ import annotations

from typing import Any, Optional, Sequence

import numpy as np

from src.autodiff import ops
from src.autodiff.parametrized import Parametrized
from src.flows.stack import FlowStack, build_flow_stack
from src.gp.sparse import SparseGP
from src.utils.errors import ContractViolation


def emission_matrix(obs_dim: int, state_dim: int) -> np.ndarray:
    """Canonical projection C = [I_{d_y} 0]."""
    if obs_dim > state_dim:
        raise ContractViolation(f"obs_dim ({obs_dim}) cannot exceed state_dim ({state_dim})")
    return np.eye(obs_dim, state_dim)


class TgpssmModel(Parametrized):
    """
    Transformed-GP state-space model.

        x_0 ~ N(0, I)
        f_t = f(x_{t-1}, u_t),  f ~ sparse GP
        x_t ~ N(G(f_t), Q)
        y_t ~ N(C x_t, R)

    Q and R are diagonal and stored as log-variances. C is fixed. With
    ``flow=None`` the model is a plain GPSSM.
    """

    PARAMS = ("log_q_diag", "log_r_diag")
    CHILDREN = ("gp", "flow")

    def __init__(
        self,
        gp: SparseGP,
        flow: Optional[FlowStack],
        q_diag: Any,
        r_diag: Any,
        C: Optional[np.ndarray] = None,
        train_noise: bool = True
    ):
        """
        Initialize the model.

        Args:
            gp: Sparse GP over f: R^{d_x + d_u} -> R^{d_x}
            flow: Marginal flow stack, or None for a GPSSM
            q_diag: Process-noise variances (scalar or d_x)
            r_diag: Observation-noise variances (scalar or d_y)
            C: d_y x d_x emission matrix (default: identity / canonical projection)
            train_noise: Whether Q and R are optimised
        """
        state_dim = gp.output_dim
        if C is None:
            r = np.atleast_1d(np.asarray(r_diag, dtype=np.float64))
            C = emission_matrix(r.shape[0] if r.shape[0] > 1 else state_dim, state_dim)
        C = np.atleast_2d(np.asarray(C, dtype=np.float64))
        if C.shape[1] != state_dim:
            raise ContractViolation(f"C must have {state_dim} columns, got shape {C.shape}")
        if gp.input_dim < state_dim:
            raise ContractViolation("GP input dimension must be at least the state dimension")
        q = np.broadcast_to(np.asarray(q_diag, dtype=np.float64), (state_dim,))
        r = np.broadcast_to(np.asarray(r_diag, dtype=np.float64), (C.shape[0],))
        if np.any(q <= 0) or np.any(r <= 0):
            raise ContractViolation("noise variances must be positive")

        self.gp = gp
        self.flow = flow
        self.C = C
        self.log_q_diag = np.log(q).copy()
        self.log_r_diag = np.log(r).copy()
        self.frozen = set() if train_noise else {"log_q_diag", "log_r_diag"}

    @property
    def state_dim(self) -> int:
        return self.gp.output_dim

    @property
    def obs_dim(self) -> int:
        return int(self.C.shape[0])

    @property
    def control_dim(self) -> int:
        return self.gp.input_dim - self.state_dim

    @property
    def is_transformed(self) -> bool:
        return self.flow is not None and len(self.flow) > 0

    @property
    def Q(self) -> np.ndarray:
        return np.diag(np.exp(ops.value_of(self.log_q_diag)))

    @property
    def R(self) -> np.ndarray:
        return np.diag(np.exp(ops.value_of(self.log_r_diag)))

    def q_diag(self):
        return ops.exp(self.log_q_diag)

    def r_diag(self):
        return ops.exp(self.log_r_diag)

    def gp_inputs(self, x_prev, controls=None):
        """GP input [x_{t-1}, u_t] over the last axis."""
        if self.control_dim == 0:
            return x_prev
        if controls is None:
            raise ContractViolation(f"model expects {self.control_dim} control input(s) per step")
        return ops.concatenate([x_prev, controls], axis=-1)

    def __repr__(self) -> str:
        kind = "TGPSSM" if self.is_transformed else "GPSSM"
        return (f"TgpssmModel({kind}, d_x={self.state_dim}, d_y={self.obs_dim}, "
                f"d_u={self.control_dim}, M={self.gp.num_inducing})")


def build_model(
    state_dim: int,
    obs_dim: int,
    rng: np.random.Generator,
    num_inducing: int = 15,
    control_dim: int = 0,
    flow_specs: Optional[Sequence[Any]] = None,
    lengthscale: float = 1.0,
    variance: float = 1.0,
    process_noise: float = 0.05,
    observation_noise: float = 0.1,
    z_range: tuple = (-2.0, 2.0),
    train_inducing: bool = True,
    inducing_init_std: float = 0.1,
    train_noise: bool = True
) -> TgpssmModel:
    """Build a model with standard initial values from plain settings."""
    gp = SparseGP.create(
        state_dim,
        state_dim + control_dim,
        num_inducing,
        rng,
        lengthscale=lengthscale,
        variance=variance,
        z_range=z_range,
        init_std=inducing_init_std,
        train_inducing=train_inducing,
    )
    flow = build_flow_stack(flow_specs, state_dim, rng)
    return TgpssmModel(gp, flow, process_noise, observation_noise, C=emission_matrix(obs_dim, state_dim),
                       train_noise=train_noise)

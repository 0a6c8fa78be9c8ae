"""Inference network and variational state for q(x_{0:T})."""

from __future__ import annotations

from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from src.autodiff import ops
from src.autodiff.layers import DenseNetwork, lower_factor, lower_factor_inverse, softplus_inverse
from src.autodiff.parametrized import Parametrized
from src.gp.conditionals import GaussianDist
from src.utils.errors import ContractViolation


class BackwardEncoder(Parametrized):
    """
    Elman recurrent encoder run from t = T down to t = 1.

    h_t = tanh([y_t, u_t] W_in + h_{t+1} W_h + b), h_{T+1} = 0, so h_t
    summarises y_{t:T}.
    """

    PARAMS = ("w_in", "w_h", "bias")

    def __init__(self, input_dim: int, hidden_units: int, rng: np.random.Generator):
        limit_in = np.sqrt(6.0 / (input_dim + hidden_units))
        limit_h = np.sqrt(3.0 / hidden_units)
        self.w_in = rng.uniform(-limit_in, limit_in, size=(input_dim, hidden_units))
        self.w_h = rng.uniform(-limit_h, limit_h, size=(hidden_units, hidden_units))
        self.bias = np.zeros(hidden_units)

    @property
    def hidden_units(self) -> int:
        return int(ops.value_of(self.bias).shape[0])

    def __call__(self, inputs: np.ndarray) -> List[Any]:
        """
        Args:
            inputs: B x T x input_dim

        Returns:
            List of T contexts, each B x hidden_units (index t-1 holds h_t)
        """
        B, T, _ = inputs.shape
        h = np.zeros((B, self.hidden_units))
        contexts: List[Any] = [None] * T
        for t in range(T - 1, -1, -1):
            pre = ops.add(ops.matmul(inputs[:, t, :], self.w_in), ops.matmul(h, self.w_h))
            h = ops.tanh(ops.add(pre, self.bias))
            contexts[t] = h
        return contexts


class InferenceNet(Parametrized):
    """
    q(x_t | x_{t-1}, y_{1:T}) = N(omega_t, diag(Sigma_t)).

    The head maps [x_{t-1}, h_t] to (delta, raw); omega = x_{t-1} + delta
    and Sigma = softplus(raw)^2.
    """

    CHILDREN = ("encoder", "head")

    def __init__(
        self,
        state_dim: int,
        obs_dim: int,
        rng: np.random.Generator,
        control_dim: int = 0,
        hidden_units: int = 32,
        head_units: Sequence[int] = (32, 32),
        init_std: float = 0.3
    ):
        """
        Initialize the network.

        Args:
            state_dim: d_x
            obs_dim: d_y
            rng: Generator for weight initialization
            control_dim: d_u (controls are fed to the encoder)
            hidden_units: Width of the recurrent encoder
            head_units: Hidden widths of the conditional head
            init_std: Initial standard deviation sqrt(Sigma) of every step
        """
        self.state_dim = state_dim
        self.obs_dim = obs_dim
        self.control_dim = control_dim
        self.encoder = BackwardEncoder(obs_dim + control_dim, hidden_units, rng)
        self.head = DenseNetwork([state_dim + hidden_units, *head_units, 2 * state_dim], rng, zero_output=True)
        last = self.head.layers[-1]
        last.bias = np.concatenate([np.zeros(state_dim), np.full(state_dim, softplus_inverse(init_std))])

    def encode(self, y: np.ndarray, controls: Optional[np.ndarray] = None) -> List[Any]:
        """Backward contexts h_1..h_T for a B x T x d_y batch."""
        inputs = y if controls is None else np.concatenate([y, controls], axis=-1)
        return self.encoder(inputs)

    def step(self, x_prev, context) -> Tuple[Any, Any]:
        """
        One conditional step for a batch.

        Returns:
            (omega, Sigma), each B x d_x
        """
        out = self.head(ops.concatenate([x_prev, context], axis=-1))
        delta = ops.getitem(out, (Ellipsis, slice(0, self.state_dim)))
        raw = ops.getitem(out, (Ellipsis, slice(self.state_dim, 2 * self.state_dim)))
        return ops.add(x_prev, delta), ops.square(ops.softplus(raw))


def inference_step(net: InferenceNet, x_prev: Any, context: Any) -> GaussianDist:
    """q(x_t | x_{t-1}) for a single state and context, as a diagonal GaussianDist."""
    x = np.atleast_2d(np.asarray(ops.value_of(x_prev), dtype=np.float64))
    h = np.atleast_2d(np.asarray(ops.value_of(context), dtype=np.float64))
    omega, sigma = net.detached().step(x, h)
    return GaussianDist(omega[0], np.diag(sigma[0]))


class VariationalState(Parametrized):
    """q(x_0) = N(m0, L0 L0^T) plus the inference network."""

    PARAMS = ("m0", "raw_L0")
    CHILDREN = ("net",)

    def __init__(self, net: InferenceNet, m0: Optional[Any] = None, L0: Optional[Any] = None):
        d_x = net.state_dim
        m0 = np.zeros(d_x) if m0 is None else np.asarray(m0, dtype=np.float64).reshape(d_x)
        L0 = np.eye(d_x) if L0 is None else np.asarray(L0, dtype=np.float64)
        if L0.shape != (d_x, d_x):
            raise ContractViolation(f"L0 must be {d_x} x {d_x}, got {L0.shape}")
        self.net = net
        self.m0 = m0
        self.raw_L0 = lower_factor_inverse(L0)

    @classmethod
    def create(
        cls,
        state_dim: int,
        obs_dim: int,
        rng: np.random.Generator,
        control_dim: int = 0,
        hidden_units: int = 32,
        head_units: Sequence[int] = (32, 32),
        init_std: float = 0.3
    ) -> "VariationalState":
        net = InferenceNet(state_dim, obs_dim, rng, control_dim, hidden_units, head_units, init_std)
        return cls(net)

    @property
    def state_dim(self) -> int:
        return self.net.state_dim

    def L0(self):
        return lower_factor(self.raw_L0)

    def __repr__(self) -> str:
        return f"VariationalState(d_x={self.state_dim}, hidden={self.net.encoder.hidden_units})"

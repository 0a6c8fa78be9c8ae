"""
Sparse variational GP over the transition function.

Every output dimension d has its own SE kernel and a Gaussian q(u_d) =
N(m_d, L_d L_d^T) over its values at the shared inducing inputs Z. The
inducing values are marginalised analytically, so q(f(x)) is Gaussian.
"""

from __future__ import annotations

from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from src.autodiff import ops
from src.autodiff.layers import lower_factor, lower_factor_inverse
from src.autodiff.parametrized import Parametrized
from src.utils.errors import ContractViolation
from src.utils.logger import get_logger
from .conditionals import GaussianDist, jittered_cholesky, log_det_from_cholesky
from .kernels import SeKernel, kernel_diag, kernel_matrix

logger = get_logger()

# lower bound on marginal variances of q(f)
VARIANCE_FLOOR = 1e-12


class SparseGP(Parametrized):
    """
    Inducing-point GP with d_x independent outputs.

    Parameters:
        Z: M x D_in inducing inputs (shared by all outputs)
        q_mean: d_x x M variational means m_d
        q_raw_factor: d_x x M x M raw Cholesky factors (see ``lower_factor``)
    """

    PARAMS = ("Z", "q_mean", "q_raw_factor")
    CHILDREN = ("kernels",)

    def __init__(
        self,
        kernels: Sequence[SeKernel],
        Z: np.ndarray,
        q_mean: np.ndarray,
        q_factor: np.ndarray,
        train_inducing: bool = True
    ):
        """
        Initialize the sparse GP.

        Args:
            kernels: One kernel per output dimension
            Z: M x D_in inducing inputs
            q_mean: d_x x M means
            q_factor: d_x x M x M lower Cholesky factors with positive diagonal
            train_inducing: Whether Z is optimised
        """
        Z = np.asarray(Z, dtype=np.float64)
        q_mean = np.asarray(q_mean, dtype=np.float64)
        q_factor = np.asarray(q_factor, dtype=np.float64)
        d_x, M = len(kernels), Z.shape[0]
        if Z.ndim != 2 or M < 1:
            raise ContractViolation(f"inducing inputs must be an M x D matrix with M >= 1, got {Z.shape}")
        if q_mean.shape != (d_x, M) or q_factor.shape != (d_x, M, M):
            raise ContractViolation(
                f"variational parameters must have shapes ({d_x}, {M}) and ({d_x}, {M}, {M})"
            )
        if any(k.input_dim != Z.shape[1] for k in kernels):
            raise ContractViolation("kernel input dimension differs from inducing-input dimension")

        self.kernels: List[SeKernel] = list(kernels)
        self.Z = Z
        self.q_mean = q_mean
        self.q_raw_factor = np.stack([lower_factor_inverse(f) for f in q_factor])
        self.frozen = set() if train_inducing else {"Z"}

    @classmethod
    def create(
        cls,
        state_dim: int,
        input_dim: int,
        num_inducing: int,
        rng: np.random.Generator,
        lengthscale: float = 1.0,
        variance: float = 1.0,
        z_range: Tuple[float, float] = (-2.0, 2.0),
        mean_init: str = "identity",
        init_std: float = 0.1,
        train_inducing: bool = True
    ) -> "SparseGP":
        """
        Build a sparse GP with standard initial values.

        Z is a regular grid over ``z_range`` in one dimension and uniform
        random otherwise. With ``mean_init='identity'`` the inducing means
        start at the corresponding state coordinate, so the initial mean
        transition is close to x_t = x_{t-1}.
        """
        if num_inducing < 1:
            raise ContractViolation("num_inducing must be at least 1")
        low, high = z_range
        if input_dim == 1:
            Z = np.linspace(low, high, num_inducing).reshape(-1, 1)
        else:
            Z = rng.uniform(low, high, size=(num_inducing, input_dim))
        kernels = [SeKernel(lengthscale, variance, input_dim) for _ in range(state_dim)]
        if mean_init == "identity":
            q_mean = np.stack([Z[:, d] if d < input_dim else np.zeros(num_inducing) for d in range(state_dim)])
        elif mean_init == "zero":
            q_mean = np.zeros((state_dim, num_inducing))
        else:
            raise ContractViolation(f"unknown mean_init '{mean_init}'")
        q_factor = np.stack([init_std * np.eye(num_inducing) for _ in range(state_dim)])
        return cls(kernels, Z, q_mean, q_factor, train_inducing=train_inducing)

    @property
    def output_dim(self) -> int:
        return len(self.kernels)

    @property
    def input_dim(self) -> int:
        return int(ops.value_of(self.Z).shape[1])

    @property
    def num_inducing(self) -> int:
        return int(ops.value_of(self.Z).shape[0])

    def q_factor(self, d: int):
        """Lower Cholesky factor L_d of the covariance of q(u_d)."""
        return lower_factor(ops.getitem(self.q_raw_factor, d))

    def prior_factors(self) -> list:
        """Cholesky factors of K_ZZ + jitter for every output dimension."""
        return [
            jittered_cholesky(kernel_matrix(k, self.Z, self.Z), name=f"gp.Kzz[{d}]")
            for d, k in enumerate(self.kernels)
        ]

    def q_u(self, d: int) -> GaussianDist:
        """q(u_d) as a GaussianDist (numpy values)."""
        chol = ops.value_of(self.q_factor(d))
        return GaussianDist(np.array(ops.value_of(self.q_mean)[d]), chol @ chol.T)

    def __repr__(self) -> str:
        return f"SparseGP(outputs={self.output_dim}, inputs={self.input_dim}, M={self.num_inducing})"


def marginal_moments(gp: SparseGP, X: Any, factors: Optional[list] = None):
    """
    Means and variances of q(f(x)) = int p(f | u) q(u) du at a batch of inputs.

    Args:
        gp: Sparse GP
        X: B x D_in inputs
        factors: Precomputed ``gp.prior_factors()`` (recomputed if None)

    Returns:
        (mean, var), each B x d_x
    """
    if ops.value_of(X).ndim != 2 or ops.value_of(X).shape[1] != gp.input_dim:
        raise ContractViolation(f"inputs must be B x {gp.input_dim}, got {ops.value_of(X).shape}")
    if factors is None:
        factors = gp.prior_factors()

    means, variances = [], []
    for d, kernel in enumerate(gp.kernels):
        chol_z = factors[d]
        k_zx = kernel_matrix(kernel, gp.Z, X)
        A = ops.solve_triangular(chol_z, k_zx)
        W = ops.solve_triangular(ops.transpose(chol_z), A, lower=False)
        means.append(ops.matmul(ops.transpose(W), ops.getitem(gp.q_mean, d)))
        LtW = ops.matmul(ops.transpose(gp.q_factor(d)), W)
        var = ops.sub(kernel_diag(kernel, X), ops.sum(ops.square(A), axis=0))
        var = ops.add(var, ops.sum(ops.square(LtW), axis=0))
        # K_ZZ already carries the jitter; only round-off can push var below zero
        variances.append(ops.clip_min(var, VARIANCE_FLOOR))
    return ops.stack(means, axis=-1), ops.stack(variances, axis=-1)


def marginal_q_ft(gp: SparseGP, x_prev: Any) -> GaussianDist:
    """q(f_t) at a single input, as a diagonal GaussianDist over the d_x outputs."""
    x = np.atleast_1d(ops.value_of(x_prev))
    mean, var = marginal_moments(gp.detached(), x.reshape(1, -1))
    return GaussianDist(mean[0], np.diag(var[0]))


def prior_kl(gp: SparseGP, factors: Optional[list] = None):
    """
    Sum over outputs of KL(q(u_d) || p(u_d)), p(u_d) = N(0, K_ZZ + jitter).
    """
    if factors is None:
        factors = gp.prior_factors()
    M = gp.num_inducing
    total = 0.0
    for d in range(gp.output_dim):
        chol_z = factors[d]
        chol_q = gp.q_factor(d)
        a = ops.solve_triangular(chol_z, ops.getitem(gp.q_mean, d))
        B = ops.solve_triangular(chol_z, chol_q)
        kl = ops.add(ops.sum(ops.square(a)), ops.sum(ops.square(B)))
        kl = ops.add(ops.sub(kl, log_det_from_cholesky(chol_q)), log_det_from_cholesky(chol_z))
        total = ops.add(total, ops.mul(0.5, ops.sub(kl, float(M))))
    return total

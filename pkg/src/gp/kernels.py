"""Squared-exponential kernel."""

from __future__ import annotations

from typing import Any, Union

import numpy as np

from src.autodiff import ops
from src.autodiff.parametrized import Parametrized
from src.utils.errors import ContractViolation

# Added to kernel-matrix diagonals before every Cholesky factorisation
JITTER = 1e-6


class SeKernel(Parametrized):
    """
    Squared-exponential (RBF) kernel with one length-scale per input dimension.

    Both hyperparameters are stored as logs and exponentiated on use.
    """

    PARAMS = ("log_lengthscale", "log_variance")

    def __init__(self, lengthscale: Union[float, np.ndarray] = 1.0, variance: float = 1.0, input_dim: int = 1):
        """
        Initialize the kernel.

        Args:
            lengthscale: Positive scalar (shared) or one value per input dimension
            variance: Positive output scale sigma^2
            input_dim: Number of input dimensions
        """
        lengthscale = np.broadcast_to(np.asarray(lengthscale, dtype=np.float64), (input_dim,))
        if np.any(lengthscale <= 0) or variance <= 0:
            raise ContractViolation("kernel length-scales and variance must be positive")
        self.log_lengthscale = np.log(lengthscale).copy()
        self.log_variance = np.asarray(np.log(variance), dtype=np.float64)

    @property
    def input_dim(self) -> int:
        return int(np.size(ops.value_of(self.log_lengthscale)))

    @property
    def lengthscale(self) -> np.ndarray:
        return np.exp(ops.value_of(self.log_lengthscale))

    @property
    def variance(self) -> float:
        return float(np.exp(ops.value_of(self.log_variance)))

    def __repr__(self) -> str:
        return f"SeKernel(lengthscale={np.round(self.lengthscale, 4)}, variance={self.variance:.4f})"


def kernel_matrix(kernel: SeKernel, A: Any, B: Any):
    """
    Cross-covariance matrix k(A_i, B_j).

    Args:
        kernel: SE kernel
        A: n x D inputs
        B: p x D inputs

    Returns:
        n x p matrix sigma^2 exp(-sum_k (A_ik - B_jk)^2 / (2 l_k^2))
    """
    va, vb = ops.value_of(A), ops.value_of(B)
    if va.ndim != 2 or vb.ndim != 2 or va.shape[1] != vb.shape[1] or va.shape[1] != kernel.input_dim:
        raise ContractViolation(
            f"kernel inputs must be n x {kernel.input_dim} and p x {kernel.input_dim}, got {va.shape} and {vb.shape}"
        )
    n, dim = va.shape
    p = vb.shape[0]
    inv_ell = ops.exp(ops.neg(kernel.log_lengthscale))
    a = ops.reshape(ops.mul(A, inv_ell), (n, 1, dim))
    b = ops.reshape(ops.mul(B, inv_ell), (1, p, dim))
    sq_dist = ops.sum(ops.square(ops.sub(a, b)), axis=-1)
    return ops.mul(ops.exp(kernel.log_variance), ops.exp(ops.mul(sq_dist, -0.5)))


def kernel_diag(kernel: SeKernel, A: Any):
    """Diagonal of k(A, A), i.e. sigma^2 for every row of A."""
    n = ops.value_of(A).shape[0]
    return ops.mul(ops.exp(kernel.log_variance), np.ones(n))

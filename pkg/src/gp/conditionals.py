"""Gaussian distributions, exact GP conditionals and Gaussian KL."""

from __future__ import annotations

import math
from typing import Any, Optional

import numpy as np

from src.autodiff import ops
from src.utils.errors import ConditioningError, ContractViolation, DecompositionError
from .kernels import JITTER, SeKernel, kernel_matrix

LOG_2PI = math.log(2.0 * math.pi)


class GaussianDist:
    """Multivariate Gaussian given by a mean vector and a covariance matrix."""

    def __init__(self, mean: Any, covariance: Any):
        """
        Initialize a Gaussian.

        Args:
            mean: n-vector
            covariance: n x n symmetric positive-semidefinite matrix
        """
        vm, vc = ops.value_of(mean), ops.value_of(covariance)
        if vc.shape != (vm.shape[0], vm.shape[0]):
            raise ContractViolation(f"covariance shape {vc.shape} does not match mean of length {vm.shape[0]}")
        if not np.allclose(vc, vc.T, rtol=0.0, atol=1e-10):
            raise ContractViolation("covariance is not symmetric within 1e-10")
        self.mean = mean
        self.covariance = covariance

    @property
    def dim(self) -> int:
        return int(ops.value_of(self.mean).shape[0])

    @property
    def variance(self) -> np.ndarray:
        return np.diag(ops.value_of(self.covariance)).copy()

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        """Draw samples (numpy only)."""
        mean, cov = ops.value_of(self.mean), ops.value_of(self.covariance)
        chol = np.linalg.cholesky(cov + JITTER * np.eye(self.dim))
        shape = (self.dim,) if size is None else (size, self.dim)
        eps = rng.standard_normal(shape)
        return mean + eps @ chol.T

    def __repr__(self) -> str:
        return f"GaussianDist(dim={self.dim})"


def jittered_cholesky(K: Any, name: str):
    """Cholesky factor of K + JITTER I, raising ConditioningError on failure."""
    n = ops.value_of(K).shape[-1]
    try:
        return ops.cholesky(ops.add(K, JITTER * np.eye(n)), name=name)
    except DecompositionError as exc:
        raise ConditioningError(f"matrix not positive definite after jitter {JITTER}", node=name) from exc


def log_det_from_cholesky(chol: Any):
    """log |L L^T| for a lower factor with positive diagonal."""
    return ops.mul(2.0, ops.sum(ops.log(ops.diagonal(chol))))


def gaussian_log_density(x: Any, mean: Any, covariance: Any, name: str = "gaussian"):
    """log N(x | mean, covariance) for a single vector x."""
    n = ops.value_of(x).shape[0]
    chol = ops.cholesky(covariance, name=f"{name}.cov")
    alpha = ops.solve_triangular(chol, ops.sub(x, mean))
    quad = ops.sum(ops.square(alpha))
    return ops.mul(-0.5, ops.add(ops.add(n * LOG_2PI, log_det_from_cholesky(chol)), quad))


def diag_gaussian_log_density(x: Any, mean: Any, variance: Any):
    """
    Sum over the last axis of log N(x_i | mean_i, variance_i).

    Inputs broadcast; the result has the leading (batch) shape.
    """
    resid = ops.sub(x, mean)
    terms = ops.add(ops.add(LOG_2PI, ops.log(variance)), ops.div(ops.square(resid), variance))
    return ops.mul(-0.5, ops.sum(terms, axis=-1))


def gp_conditional(
    kernel: SeKernel,
    train_X: Any,
    train_f: Any,
    noise_var: float,
    test_X: Any
) -> GaussianDist:
    """
    Posterior of a zero-mean GP at test inputs given (noisy) training values.

    Args:
        kernel: SE kernel
        train_X: n x D training inputs (n may be 0)
        train_f: n training targets
        noise_var: Observation noise variance (0 for noiseless conditioning)
        test_X: p x D test inputs

    Returns:
        GaussianDist over the p test values (jitter applied to the training Gram matrix)
    """
    if noise_var < 0:
        raise ContractViolation("noise_var must be non-negative")
    k_ss = kernel_matrix(kernel, test_X, test_X)
    n = ops.value_of(train_X).shape[0] if np.size(ops.value_of(train_X)) else 0
    p = ops.value_of(test_X).shape[0]
    if n == 0:
        return GaussianDist(np.zeros(p), k_ss)

    k_xx = ops.add(kernel_matrix(kernel, train_X, train_X), noise_var * np.eye(n))
    chol = jittered_cholesky(k_xx, name="gp_conditional.K")
    k_xs = kernel_matrix(kernel, train_X, test_X)
    A = ops.solve_triangular(chol, k_xs)
    alpha = ops.solve_triangular(chol, train_f)
    mean = ops.matmul(ops.transpose(A), alpha)
    cov = ops.sub(k_ss, ops.matmul(ops.transpose(A), A))
    cov = ops.mul(0.5, ops.add(cov, ops.transpose(cov)))
    return GaussianDist(mean, cov)


def kl_gaussian(q: GaussianDist, p: GaussianDist):
    """
    KL(q || p) between two multivariate Gaussians.

    Returns:
        0.5 [ (mu_p - mu_q)^T Sp^-1 (mu_p - mu_q) + tr(Sp^-1 Sq) - ln(|Sq|/|Sp|) - n ]
    """
    if q.dim != p.dim:
        raise ContractViolation(f"KL between Gaussians of dimension {q.dim} and {p.dim}")
    n = q.dim
    chol_q = ops.cholesky(q.covariance, name="kl.q")
    chol_p = ops.cholesky(p.covariance, name="kl.p")
    a = ops.solve_triangular(chol_p, ops.sub(p.mean, q.mean))
    B = ops.solve_triangular(chol_p, chol_q)
    total = ops.add(ops.sum(ops.square(a)), ops.sum(ops.square(B)))
    total = ops.sub(total, log_det_from_cholesky(chol_q))
    total = ops.add(total, log_det_from_cholesky(chol_p))
    return ops.mul(0.5, ops.sub(total, float(n)))

"""Gaussian-process core: SE kernel, exact conditionals and the sparse variational GP."""

from .kernels import JITTER, SeKernel, kernel_matrix, kernel_diag
from .conditionals import (
    GaussianDist, gp_conditional, kl_gaussian, gaussian_log_density,
    diag_gaussian_log_density, jittered_cholesky, log_det_from_cholesky,
)
from .sparse import SparseGP, marginal_moments, marginal_q_ft, prior_kl

__all__ = [
    'JITTER', 'SeKernel', 'kernel_matrix', 'kernel_diag',
    'GaussianDist', 'gp_conditional', 'kl_gaussian', 'gaussian_log_density',
    'diag_gaussian_log_density', 'jittered_cholesky', 'log_det_from_cholesky',
    'SparseGP', 'marginal_moments', 'marginal_q_ft', 'prior_kl',
]

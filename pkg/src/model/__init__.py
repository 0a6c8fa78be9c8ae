"""The TGPSSM generative model: parameters, trajectories, samplers and densities."""

from .ssm import TgpssmModel, build_model, emission_matrix
from .trajectory import Trajectory, write_trajectory_csv, read_trajectory_csv
from .sampling import sample_prior_exact, sample_prior_sparse, sample_inducing_values
from .density import (
    joint_log_density, transformed_gp_log_density,
    augmented_prior_log_density, joint_prior_log_density_direct,
)

__all__ = [
    'TgpssmModel', 'build_model', 'emission_matrix',
    'Trajectory', 'write_trajectory_csv', 'read_trajectory_csv',
    'sample_prior_exact', 'sample_prior_sparse', 'sample_inducing_values',
    'joint_log_density', 'transformed_gp_log_density',
    'augmented_prior_log_density', 'joint_prior_log_density_direct',
]

"""Mean-field variational family, inference network and the ELBO."""

from .network import BackwardEncoder, InferenceNet, VariationalState, inference_step
from .variational import (
    ElboNoise, PathSample, as_batch, sample_q_trajectory, infer_state_means, log_q_trajectory,
)
from .elbo import (
    TERM_NAMES, term_kl_x0, term_kl_u, term_entropy, term_data_reconstruction,
    term_state_reconstruction, elbo_terms, combine_terms, breakdown_from_terms, elbo,
)

__all__ = [
    'BackwardEncoder', 'InferenceNet', 'VariationalState', 'inference_step',
    'ElboNoise', 'PathSample', 'as_batch', 'sample_q_trajectory', 'infer_state_means', 'log_q_trajectory',
    'TERM_NAMES', 'term_kl_x0', 'term_kl_u', 'term_entropy', 'term_data_reconstruction',
    'term_state_reconstruction', 'elbo_terms', 'combine_terms', 'breakdown_from_terms', 'elbo',
]

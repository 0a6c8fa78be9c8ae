"""
The five ELBO terms and their assembly.

    ELBO = data_recon + state_recon + entropy - kl_x0 - kl_u

Every term is a sum over the sequences of a batch; q(x_0) is per
sequence, so kl_x0 is counted once per sequence while kl_u (the shared
transition function) is counted once per evaluation.
"""

from __future__ import annotations

import math
from typing import Any, Callable, Dict, Optional

import numpy as np

from src.autodiff import ops
from src.flows.stack import flow_forward
from src.gp.conditionals import diag_gaussian_log_density, log_det_from_cholesky
from src.gp.sparse import SparseGP, marginal_moments, prior_kl
from src.model.ssm import TgpssmModel
from src.schema.models import ElboBreakdown
from src.utils.errors import NumericError, TermEvaluationError
from .network import VariationalState
from .variational import ElboNoise, PathSample, as_batch, sample_q_trajectory

LOG_2PI = math.log(2.0 * math.pi)

TERM_NAMES = ("kl_x0", "kl_u", "entropy", "state_recon", "data_recon")


def _evaluate(term: str, fn: Callable[[], Any]):
    try:
        return fn()
    except TermEvaluationError:
        raise
    except NumericError as exc:
        raise TermEvaluationError(term, exc) from exc


def term_kl_x0(vs: VariationalState):
    """KL(N(m0, L0 L0^T) || N(0, I)) = 0.5 [m0'm0 + tr(L0 L0^T) - 2 log|L0| - d_x]."""
    L0 = vs.L0()
    total = ops.add(ops.sum(ops.square(vs.m0)), ops.sum(ops.square(L0)))
    total = ops.sub(total, log_det_from_cholesky(L0))
    return ops.mul(0.5, ops.sub(total, float(vs.state_dim)))


def term_kl_u(gp: SparseGP, factors: Optional[list] = None):
    """sum_d KL(q(u_d) || p(u_d))."""
    return prior_kl(gp, factors)


def term_entropy(sigmas):
    """
    Sum over steps and sequences of the entropy of N(omega_t, diag(Sigma_t)).

    Args:
        sigmas: ... x d_x positive variances
    """
    per_dim = ops.add(0.5 * (LOG_2PI + 1.0), ops.mul(0.5, ops.log(sigmas)))
    return ops.sum(per_dim)


def term_data_reconstruction(model: TgpssmModel, omegas, sigmas, y: np.ndarray):
    """
    sum_t E_q(x_t|x_{t-1})[log N(y_t | C x_t, R)] in closed form:
    log N(y_t | C omega_t, R) - 0.5 tr(R^-1 C Sigma_t C^T).

    Args:
        model: TGPSSM (C and R)
        omegas: T x B x d_x means
        sigmas: T x B x d_x variances
        y: B x T x d_y observations
    """
    y_tb = np.swapaxes(np.asarray(y, dtype=np.float64), 0, 1)
    r = model.r_diag()
    C = model.C
    mean = ops.matmul(omegas, C.T)
    log_lik = ops.sum(diag_gaussian_log_density(y_tb, mean, r))
    spread = ops.div(ops.matmul(sigmas, (C * C).T), r)
    return ops.sub(log_lik, ops.mul(0.5, ops.sum(spread)))


def term_state_reconstruction(
    model: TgpssmModel,
    states,
    f_eps: np.ndarray,
    controls: Optional[np.ndarray] = None,
    factors: Optional[list] = None
):
    """
    sum_t (1/n) sum_i log N(x_t | G(f_t^(i)), Q), f_t^(i) ~ q(f_t) at x_{t-1}.

    Args:
        model: TGPSSM
        states: (T+1) x B x d_x sampled states
        f_eps: T x n x B x d_x standard-normal draws for f
        controls: B x T x d_u controls, if the model has any
        factors: Precomputed Cholesky factors of K_ZZ
    """
    T, n, B, d_x = f_eps.shape
    prev = ops.reshape(ops.getitem(states, slice(0, T)), (T * B, d_x))
    nxt = ops.reshape(ops.getitem(states, slice(1, T + 1)), (T * B, d_x))
    u = None if controls is None else np.swapaxes(controls, 0, 1).reshape(T * B, -1)
    inputs = model.gp_inputs(prev, u)

    mean, var = marginal_moments(model.gp, inputs, factors)
    eps = np.swapaxes(f_eps, 0, 1).reshape(n, T * B, d_x)
    f = ops.add(mean, ops.mul(ops.sqrt(var), eps))
    f_tilde = flow_forward(model.flow, f)
    log_lik = diag_gaussian_log_density(nxt, f_tilde, model.q_diag())
    return ops.mul(ops.sum(log_lik), 1.0 / n)


def elbo_terms(
    model: TgpssmModel,
    vs: VariationalState,
    y: Any,
    noise: ElboNoise,
    controls: Optional[Any] = None,
    include_kl_u: bool = True,
    factors: Optional[list] = None
) -> Dict[str, Any]:
    """
    Evaluate all five terms on one sampled path per sequence.

    Values are tape variables when the parameters are, so the result can
    be combined into an objective and differentiated.

    Raises:
        TermEvaluationError: A numeric failure, labelled with the failing term
    """
    y, controls = as_batch(y, controls)
    B = y.shape[0]
    if factors is None:
        factors = _evaluate("kl_u", model.gp.prior_factors)

    path: PathSample = _evaluate("q_path", lambda: sample_q_trajectory(vs, y, controls=controls, noise=noise))
    omegas = path.stacked_omegas()
    sigmas = path.stacked_sigmas()

    terms: Dict[str, Any] = {}
    terms["kl_x0"] = _evaluate("kl_x0", lambda: ops.mul(float(B), term_kl_x0(vs)))
    terms["kl_u"] = _evaluate("kl_u", lambda: term_kl_u(model.gp, factors)) if include_kl_u else 0.0
    terms["entropy"] = _evaluate("entropy", lambda: term_entropy(sigmas))
    terms["state_recon"] = _evaluate(
        "state_recon",
        lambda: term_state_reconstruction(model, path.stacked_states(), noise.f_eps, controls, factors),
    )
    terms["data_recon"] = _evaluate("data_recon", lambda: term_data_reconstruction(model, omegas, sigmas, y))
    return terms


def combine_terms(terms: Dict[str, Any], kl_weight: float = 1.0):
    """data_recon + state_recon + entropy - kl_weight (kl_x0 + kl_u)."""
    fit = ops.add(ops.add(terms["data_recon"], terms["state_recon"]), terms["entropy"])
    return ops.sub(fit, ops.mul(kl_weight, ops.add(terms["kl_x0"], terms["kl_u"])))


def breakdown_from_terms(terms: Dict[str, Any]) -> ElboBreakdown:
    values = {name: float(ops.value_of(terms[name])) for name in TERM_NAMES}
    return ElboBreakdown.from_terms(**values)


def elbo(
    model: TgpssmModel,
    vs: VariationalState,
    y: Any,
    n: int = 1,
    seed: int = 0,
    controls: Optional[Any] = None
) -> ElboBreakdown:
    """
    ELBO of a batch of sequences with its five-term breakdown.

    Args:
        model: TGPSSM
        vs: Variational state
        y: T x d_y or B x T x d_y observations
        n: Monte-Carlo samples of f per step
        seed: Seed for the path and f draws
        controls: Matching control inputs, if any
    """
    y, controls = as_batch(y, controls)
    B, T, _ = y.shape
    noise = ElboNoise.draw(np.random.default_rng(seed), B, T, model.state_dim, n)
    terms = elbo_terms(model.detached(), vs.detached(), y, noise, controls)
    return breakdown_from_terms(terms)

"""Lagrange multiplier for the reconstruction constraint."""

from __future__ import annotations

import math
from typing import Any, Dict, Optional

import numpy as np

from src.gp.conditionals import diag_gaussian_log_density
from src.utils.errors import ContractViolation


class LagrangeState:
    """
    Multiplier beta, moving-average reconstruction estimate and iteration count.

    ``r_hat`` is None until the first batch estimate arrives.
    """

    def __init__(self, beta: float = 1.0, r_hat: Optional[float] = None, iteration: int = 0):
        if not beta > 0:
            raise ContractViolation(f"beta must be positive, got {beta}")
        self.beta = float(beta)
        self.r_hat = r_hat
        self.iteration = iteration

    def to_dict(self) -> Dict[str, Any]:
        return {"beta": self.beta, "r_hat": self.r_hat, "iteration": self.iteration}

    def __repr__(self) -> str:
        return f"LagrangeState(beta={self.beta:.6g}, r_hat={self.r_hat}, i={self.iteration})"


def moving_average(r_prev: Optional[float], r_batch: float, alpha: float) -> float:
    """(1 - alpha) r_batch + alpha r_prev; the first estimate is the batch value."""
    if not 0.0 <= alpha < 1.0:
        raise ContractViolation(f"alpha must lie in [0, 1), got {alpha}")
    if r_prev is None:
        return float(r_batch)
    return (1.0 - alpha) * float(r_batch) + alpha * float(r_prev)


def update_beta(state: LagrangeState, r_hat_new: float, r0: float, eta: float) -> LagrangeState:
    """
    Multiplicative dual step beta <- beta exp(-eta (r_hat - r0)).

    beta grows while the reconstruction estimate is below the target and
    shrinks once it is exceeded; it stays positive.
    """
    if not eta > 0:
        raise ContractViolation(f"eta must be positive, got {eta}")
    beta = state.beta * math.exp(-eta * (float(r_hat_new) - float(r0)))
    # exp underflow would break positivity
    beta = max(beta, np.finfo(np.float64).tiny)
    return LagrangeState(beta=beta, r_hat=float(r_hat_new), iteration=state.iteration + 1)


def r0_from_gaussian_fit(y: Any) -> float:
    """
    Reconstruction level of a diagonal Gaussian fitted to all observations.

    Summed over every observation, like the ELBO data term, so it is a
    target any useful model should reach.

    Args:
        y: T x d_y, B x T x d_y, or a list of T_i x d_y arrays
    """
    if isinstance(y, (list, tuple)):
        flat = np.concatenate([np.asarray(a, dtype=np.float64).reshape(-1, np.shape(a)[-1]) for a in y])
    else:
        y = np.asarray(y, dtype=np.float64)
        flat = y.reshape(-1, y.shape[-1])
    var = flat.var(axis=0)
    if np.any(var == 0):
        raise ContractViolation("cannot fit a Gaussian to a constant observation channel")
    return float(np.sum(diag_gaussian_log_density(flat, flat.mean(axis=0), var)))

"""Adam optimizer over named parameter arrays."""

from __future__ import annotations

import copy
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from src.utils.errors import ContractViolation


class AdamState:
    """
    Moment accumulators and constants of the Adam optimizer.

    Moments are created lazily with the shape of the parameter they track.
    """

    def __init__(
        self,
        learning_rate: float = 0.01,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        group_learning_rates: Optional[Mapping[str, float]] = None
    ):
        """
        Initialize optimizer state.

        Args:
            learning_rate: Default step size
            beta1: Decay of the first-moment estimate
            beta2: Decay of the second-moment estimate
            eps: Denominator offset
            group_learning_rates: Optional step sizes keyed by parameter-name prefix
                                  (the longest matching prefix wins)
        """
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.group_learning_rates = dict(group_learning_rates or {})
        self.first_moments: Dict[str, np.ndarray] = {}
        self.second_moments: Dict[str, np.ndarray] = {}
        self.step_count = 0

    def learning_rate_for(self, name: str) -> float:
        best, rate = -1, self.learning_rate
        for prefix, value in self.group_learning_rates.items():
            if name.startswith(prefix) and len(prefix) > best:
                best, rate = len(prefix), value
        return rate

    def to_dict(self) -> dict:
        return {
            'learning_rate': self.learning_rate,
            'beta1': self.beta1,
            'beta2': self.beta2,
            'eps': self.eps,
            'group_learning_rates': self.group_learning_rates,
            'step_count': self.step_count,
        }

    def __repr__(self) -> str:
        return f"AdamState(step={self.step_count}, lr={self.learning_rate}, tracked={len(self.first_moments)})"


def adam_step(
    state: AdamState,
    grads: Mapping[str, np.ndarray],
    params: Mapping[str, np.ndarray]
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    Apply one Adam descent step.

    Args:
        state: Current optimizer state (left untouched)
        grads: Gradients of the loss, keyed like params
        params: Current parameter values

    Returns:
        (updated params, updated state)
    """
    for name, grad in grads.items():
        if name not in params:
            raise ContractViolation(f"gradient for unknown parameter '{name}'")
        if np.shape(grad) != np.shape(params[name]):
            raise ContractViolation(
                f"gradient shape {np.shape(grad)} does not match parameter '{name}' {np.shape(params[name])}"
            )

    new_state = copy.copy(state)
    new_state.first_moments = dict(state.first_moments)
    new_state.second_moments = dict(state.second_moments)
    new_state.step_count = state.step_count + 1
    t = new_state.step_count

    updated = {}
    for name, value in params.items():
        value = np.asarray(value, dtype=np.float64)
        grad = grads.get(name)
        if grad is None:
            updated[name] = value
            continue
        m = new_state.first_moments.get(name, np.zeros_like(value))
        v = new_state.second_moments.get(name, np.zeros_like(value))
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        new_state.first_moments[name] = m
        new_state.second_moments[name] = v

        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        updated[name] = value - state.learning_rate_for(name) * m_hat / (np.sqrt(v_hat) + state.eps)

    return updated, new_state

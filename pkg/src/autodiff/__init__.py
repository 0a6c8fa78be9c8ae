"""Reverse-mode automatic differentiation, Adam, and parameter plumbing."""

from .tape import Tape, Var, Node, evaluate_with_gradients, jacobian
from .optim import AdamState, adam_step
from .parametrized import Parametrized
from .layers import DenseLayer, DenseNetwork, lower_factor, lower_factor_inverse, softplus_inverse
from . import ops

__all__ = [
    'Tape', 'Var', 'Node', 'evaluate_with_gradients', 'jacobian',
    'AdamState', 'adam_step', 'Parametrized',
    'DenseLayer', 'DenseNetwork', 'lower_factor', 'lower_factor_inverse', 'softplus_inverse',
    'ops',
]

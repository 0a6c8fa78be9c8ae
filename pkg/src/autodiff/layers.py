"""Small dense networks and constrained-parameter transforms."""

from __future__ import annotations

from typing import Any, List, Optional, Sequence

import numpy as np

from . import ops
from .parametrized import Parametrized


def softplus_inverse(y: Any) -> np.ndarray:
    """Unconstrained value whose softplus is y (y > 0)."""
    y = np.asarray(y, dtype=np.float64)
    return y + np.log(-np.expm1(-y))


def lower_factor(raw):
    """
    Lower-triangular factor with a softplus-positive diagonal.

    The strictly lower part of ``raw`` is used as is; its diagonal is passed
    through softplus, so L L^T is positive definite by construction.
    """
    n = ops.value_of(raw).shape[-1]
    strict = np.tril(np.ones((n, n)), k=-1)
    return ops.add(ops.mul(raw, strict), ops.diag_embed(ops.softplus(ops.diagonal(raw))))


def lower_factor_inverse(chol: Any) -> np.ndarray:
    """Raw parameter reproducing a given lower factor with positive diagonal."""
    chol = np.tril(np.asarray(chol, dtype=np.float64))
    raw = chol.copy()
    idx = np.arange(chol.shape[-1])
    raw[idx, idx] = softplus_inverse(chol[idx, idx])
    return raw


class DenseLayer(Parametrized):
    """Affine layer y = x W + b."""

    PARAMS = ("weight", "bias")

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        self.weight = weight
        self.bias = bias

    def __call__(self, x):
        return ops.add(ops.matmul(x, self.weight), self.bias)


class DenseNetwork(Parametrized):
    """
    Multi-layer perceptron with tanh hidden activations.

    Args:
        sizes: Layer widths including input and output, e.g. [2, 16, 16, 1]
        rng: Generator used for Glorot-uniform initialization
        zero_output: Start the output layer at zero (network outputs 0 everywhere)
    """

    CHILDREN = ("layers",)

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator, zero_output: bool = False):
        self.sizes = list(sizes)
        self.layers: List[DenseLayer] = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            if last and zero_output:
                weight = np.zeros((fan_in, fan_out))
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                weight = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            self.layers.append(DenseLayer(weight, np.zeros(fan_out)))

    def __call__(self, x, output_activation: Optional[str] = None):
        h = x
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i < len(self.layers) - 1:
                h = ops.tanh(h)
        if output_activation == "tanh":
            h = ops.tanh(h)
        return h

"""RealNVP affine coupling layers."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from src.autodiff import ops
from src.autodiff.layers import DenseNetwork
from src.autodiff.parametrized import Parametrized
from src.utils.errors import ConfigurationError, ContractViolation

# s(.) = SCALE_BOUND * tanh(net(.)) keeps exp(s) in [e^-3, e^3]
SCALE_BOUND = 3.0


class CouplingLayer(Parametrized):
    """
    Affine coupling: one block of coordinates is copied, the other is
    scaled by exp(s(copied)) and shifted by r(copied).

    With ``reverse=False`` the first ``split`` coordinates are copied;
    with ``reverse=True`` the roles swap, so stacking layers with
    alternating ``reverse`` updates every coordinate.
    """

    KIND = "Coupling"
    CHILDREN = ("scale_net", "shift_net")

    def __init__(
        self,
        state_dim: int,
        rng: np.random.Generator,
        split: Optional[int] = None,
        hidden_units: Sequence[int] = (16, 16),
        reverse: bool = False,
        trainable: bool = True
    ):
        """
        Initialize the coupling layer.

        Args:
            state_dim: Dimension d_x of the transformed vector (>= 2)
            rng: Generator for network initialization
            split: Size d of the first block (default d_x // 2)
            hidden_units: Hidden widths of both networks
            reverse: Copy the second block instead of the first
            trainable: Whether the network weights are optimised
        """
        if state_dim < 2:
            raise ConfigurationError("coupling layers need state_dim >= 2; use elementary flows for d_x = 1")
        split = state_dim // 2 if split is None else split
        if not 1 <= split < state_dim:
            raise ConfigurationError(f"coupling split must be in [1, {state_dim - 1}], got {split}")
        self.state_dim = state_dim
        self.split = split
        self.reverse = reverse
        n_keep, n_trans = len(self.keep_index), len(self.transform_index)
        sizes_in, sizes_out = [n_keep, *hidden_units], n_trans
        # zero output layers: the layer starts as the identity
        self.scale_net = DenseNetwork([*sizes_in, sizes_out], rng, zero_output=True)
        self.shift_net = DenseNetwork([*sizes_in, sizes_out], rng, zero_output=True)
        if not trainable:
            for net in (self.scale_net, self.shift_net):
                for layer in net.layers:
                    layer.frozen = {"weight", "bias"}

    @property
    def keep_index(self) -> np.ndarray:
        first, second = np.arange(self.split), np.arange(self.split, self.state_dim)
        return second if self.reverse else first

    @property
    def transform_index(self) -> np.ndarray:
        first, second = np.arange(self.split), np.arange(self.split, self.state_dim)
        return first if self.reverse else second

    def _check(self, f):
        if ops.value_of(f).shape[-1] != self.state_dim:
            raise ContractViolation(f"coupling layer expects last dimension {self.state_dim}, got {ops.value_of(f).shape}")

    def scale_and_shift(self, kept):
        """(s, r) evaluated on the copied block."""
        s = ops.mul(SCALE_BOUND, ops.tanh(self.scale_net(kept)))
        return s, self.shift_net(kept)

    def forward_and_log_det(self, f):
        """
        Forward map and log|det J| over the last axis.

        Returns:
            (output with the shape of f, log-det with the leading shape of f)
        """
        self._check(f)
        kept = ops.getitem(f, (Ellipsis, self.keep_index))
        moved = ops.getitem(f, (Ellipsis, self.transform_index))
        s, r = self.scale_and_shift(kept)
        moved = ops.add(ops.mul(moved, ops.exp(s)), r)
        # reassemble in the original coordinate order
        order = np.argsort(np.concatenate([self.keep_index, self.transform_index]))
        joined = ops.concatenate([kept, moved], axis=-1)
        return ops.getitem(joined, (Ellipsis, order)), ops.sum(s, axis=-1)

    def forward(self, f):
        return self.forward_and_log_det(f)[0]

    def log_det(self, f):
        return self.forward_and_log_det(f)[1]

    def inverse(self, y) -> np.ndarray:
        """Analytic inverse: subtract r, multiply by exp(-s)."""
        y = np.asarray(y, dtype=np.float64)
        self._check(y)
        net = self.detached()
        kept = y[..., self.keep_index]
        s, r = net.scale_and_shift(kept)
        out = np.empty_like(y)
        out[..., self.keep_index] = kept
        out[..., self.transform_index] = (y[..., self.transform_index] - r) * np.exp(-s)
        return out

    def __repr__(self) -> str:
        return f"CouplingLayer(d_x={self.state_dim}, split={self.split}, reverse={self.reverse})"

"""
Flow stacks: ordered compositions of elementary flows and coupling layers.

A model without a flow (``None``) is a plain GPSSM; the module-level
functions treat ``None`` as the identity map.
"""

from __future__ import annotations

from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.autodiff import ops
from src.autodiff.parametrized import Parametrized
from src.utils.errors import ConfigurationError, FlowDomainError
from src.utils.logger import get_logger
from .coupling import CouplingLayer
from .elementary import ElementaryFlow, make_elementary_flow

logger = get_logger()

FlowLayer = Union[ElementaryFlow, CouplingLayer]


class FlowStack(Parametrized):
    """G = G_{J-1} o ... o G_0 acting on the last axis of its input."""

    CHILDREN = ("layers",)

    def __init__(self, layers: Sequence[FlowLayer]):
        self.layers: List[FlowLayer] = list(layers)

    def __len__(self) -> int:
        return len(self.layers)

    def _layer_call(self, index: int, layer: FlowLayer, h):
        try:
            if isinstance(layer, CouplingLayer):
                return layer.forward_and_log_det(h)
            layer.check_domain(ops.value_of(h))
            return layer.forward(h), ops.sum(layer.log_derivative(h), axis=-1)
        except FlowDomainError as exc:
            if exc.layer_index is not None:
                raise
            raise FlowDomainError(str(exc), layer_index=index, kind=layer.KIND) from exc

    def forward_and_log_det(self, f) -> Tuple[Any, Any]:
        """
        Forward map and log|det dG/df|, accumulated layer by layer.

        Args:
            f: (..., d_x) values (array or tape variable)

        Returns:
            (G(f) with the shape of f, log-det with the leading shape of f)
        """
        h = f
        total = np.zeros(ops.value_of(f).shape[:-1])
        for index, layer in enumerate(self.layers):
            h, log_det = self._layer_call(index, layer, h)
            total = ops.add(total, log_det)
        return h, total

    def forward(self, f):
        h = f
        for index, layer in enumerate(self.layers):
            try:
                if not isinstance(layer, CouplingLayer):
                    layer.check_domain(ops.value_of(h))
                h = layer.forward(h)
            except FlowDomainError as exc:
                if exc.layer_index is not None:
                    raise
                raise FlowDomainError(str(exc), layer_index=index, kind=layer.KIND) from exc
        return h

    def log_det(self, f):
        return self.forward_and_log_det(f)[1]

    def inverse(self, y: Any) -> np.ndarray:
        """Numpy inverse, applying layer inverses in reverse order."""
        h = np.asarray(ops.value_of(y), dtype=np.float64)
        for index in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[index]
            try:
                h = layer.inverse(h)
            except FlowDomainError as exc:
                raise FlowDomainError(str(exc), layer_index=index, kind=layer.KIND) from exc
        return h

    def __repr__(self) -> str:
        return "FlowStack([" + ", ".join(repr(layer) for layer in self.layers) + "])"


def flow_forward(stack: Optional[FlowStack], f):
    """G(f); identity when ``stack`` is None or empty."""
    if stack is None:
        return f
    return stack.forward(f)


def flow_inverse(stack: Optional[FlowStack], y) -> np.ndarray:
    """G^{-1}(y); identity when ``stack`` is None."""
    if stack is None:
        return np.asarray(ops.value_of(y), dtype=np.float64)
    return stack.inverse(y)


def flow_log_det_jacobian(stack: Optional[FlowStack], f):
    """log|det dG/df| over the last axis; zero when ``stack`` is None."""
    if stack is None:
        return np.zeros(ops.value_of(f).shape[:-1])
    return stack.log_det(f)


def flow_forward_and_log_det(stack: Optional[FlowStack], f):
    if stack is None:
        return f, np.zeros(ops.value_of(f).shape[:-1])
    return stack.forward_and_log_det(f)


def _spec_get(spec: Any, key: str, default: Any = None) -> Any:
    if isinstance(spec, dict):
        return spec.get(key, default)
    return getattr(spec, key, default)


def build_flow_stack(specs: Optional[Iterable[Any]], state_dim: int, rng: np.random.Generator) -> Optional[FlowStack]:
    """
    Build a FlowStack from config entries.

    Each entry has ``kind``, optional ``init`` (initial constrained values),
    ``trainable``, ``num_terms`` (sum flows) and, for coupling layers,
    ``hidden_units`` and ``split``. Successive coupling layers alternate
    which block they copy.

    Returns:
        FlowStack, or None when ``specs`` is None or empty (GPSSM)
    """
    specs = list(specs or [])
    if not specs:
        return None
    layers: List[FlowLayer] = []
    n_coupling = 0
    for spec in specs:
        kind = str(_spec_get(spec, "kind"))
        trainable = bool(_spec_get(spec, "trainable", True))
        if kind.lower() in ("coupling", "realnvp"):
            if state_dim < 2:
                raise ConfigurationError("coupling layers need state_dim >= 2; use elementary flows for d_x = 1")
            layers.append(CouplingLayer(
                state_dim,
                rng,
                split=_spec_get(spec, "split"),
                hidden_units=tuple(_spec_get(spec, "hidden_units", None) or (16, 16)),
                reverse=n_coupling % 2 == 1,
                trainable=trainable,
            ))
            n_coupling += 1
        else:
            layers.append(make_elementary_flow(
                kind,
                init=_spec_get(spec, "init", None) or {},
                trainable=trainable,
                num_terms=int(_spec_get(spec, "num_terms", 1) or 1),
            ))
    stack = FlowStack(layers)
    logger.debug(f"Built {stack!r} with {stack.num_parameters()} trainable parameters")
    return stack

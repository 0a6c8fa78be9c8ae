"""Named, hierarchical parameter ownership for model components."""

from __future__ import annotations

import copy
from typing import Any, Dict, Mapping, Set

import numpy as np

from .ops import value_of


class Parametrized:
    """
    Base class for components that own parameter arrays.

    Subclasses list their parameter attributes in ``PARAMS`` and their
    sub-components in ``CHILDREN`` (a child may be a component, a list of
    components, or None). Names are dotted paths such as
    ``gp.kernels.0.log_lengthscale``. Attribute names in ``self.frozen`` are
    reported but never trained.
    """

    PARAMS: tuple = ()
    CHILDREN: tuple = ()

    def _frozen(self) -> Set[str]:
        return getattr(self, "frozen", set())

    def _children(self):
        for child_name in self.CHILDREN:
            child = getattr(self, child_name, None)
            if child is None:
                continue
            if isinstance(child, (list, tuple)):
                for i, item in enumerate(child):
                    yield f"{child_name}.{i}.", item
            else:
                yield f"{child_name}.", child

    def named_parameters(self, prefix: str = "", trainable_only: bool = False) -> Dict[str, Any]:
        """All parameter values keyed by dotted name."""
        out = {}
        frozen = self._frozen()
        for name in self.PARAMS:
            if trainable_only and name in frozen:
                continue
            out[prefix + name] = getattr(self, name)
        for child_prefix, child in self._children():
            out.update(child.named_parameters(prefix + child_prefix, trainable_only=trainable_only))
        return out

    def parameter_values(self, prefix: str = "", trainable_only: bool = False) -> Dict[str, np.ndarray]:
        """Like named_parameters but with plain numpy arrays."""
        return {
            name: np.array(value_of(value), dtype=np.float64)
            for name, value in self.named_parameters(prefix, trainable_only).items()
        }

    def num_parameters(self, trainable_only: bool = True) -> int:
        return int(sum(np.size(value_of(v)) for v in self.named_parameters(trainable_only=trainable_only).values()))

    def bind(self, values: Mapping[str, Any], prefix: str = "") -> "Parametrized":
        """
        Shallow copy with parameters replaced from ``values``.

        Values may be numpy arrays (to store updated parameters) or tape
        variables (to evaluate with gradients). Names absent from ``values``
        keep their current value.
        """
        clone = copy.copy(self)
        for name in self.PARAMS:
            key = prefix + name
            if key in values:
                setattr(clone, name, values[key])
        for child_name in self.CHILDREN:
            child = getattr(self, child_name, None)
            if child is None:
                continue
            if isinstance(child, (list, tuple)):
                setattr(clone, child_name, [
                    item.bind(values, f"{prefix}{child_name}.{i}.") for i, item in enumerate(child)
                ])
            else:
                setattr(clone, child_name, child.bind(values, f"{prefix}{child_name}."))
        return clone

    def detached(self) -> "Parametrized":
        """Copy whose parameters are plain numpy arrays."""
        return self.bind(self.parameter_values())

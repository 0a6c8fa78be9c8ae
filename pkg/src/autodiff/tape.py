"""Reverse-mode tape: recorded nodes, tape variables and gradient evaluation."""

from __future__ import annotations

from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from src.utils.errors import ContractViolation


class Node:
    """One recorded primitive: its forward value and how to pull adjoints back to its parents."""

    __slots__ = ("op", "value", "parents", "vjps", "name")

    def __init__(
        self,
        op: str,
        value: np.ndarray,
        parents: Tuple[int, ...],
        vjps: Tuple[Callable[[np.ndarray], np.ndarray], ...],
        name: Optional[str] = None
    ):
        self.op = op
        self.value = value
        self.parents = parents
        self.vjps = vjps
        self.name = name

    def __repr__(self) -> str:
        label = f" '{self.name}'" if self.name else ""
        return f"Node({self.op}{label}, shape={self.value.shape})"


class Tape:
    """
    Records primitive operations in execution order.

    Nodes are appended as they are computed, so the node list is always a
    topological order of the data dependencies. A tape has a single owner and
    is not shared while recording.
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self.adjoints: List[Optional[np.ndarray]] = []

    @property
    def values(self) -> List[np.ndarray]:
        """Forward values of all nodes, in recording order."""
        return [node.value for node in self.nodes]

    def variable(self, value: Any, name: Optional[str] = None) -> "Var":
        """Register a leaf (parameter or input) on the tape."""
        array = np.array(value, dtype=np.float64)
        return self._push("leaf", array, (), (), name)

    def _push(self, op: str, value: np.ndarray, parents, vjps, name: Optional[str] = None) -> "Var":
        self.nodes.append(Node(op, value, parents, vjps, name))
        return Var(self, len(self.nodes) - 1)

    def backward(self, output: "Var") -> List[Optional[np.ndarray]]:
        """
        Run the reverse sweep from a scalar output.

        Args:
            output: Scalar variable recorded on this tape

        Returns:
            Adjoint per node (None for nodes the output does not depend on)
        """
        if output.tape is not self:
            raise ContractViolation("output variable belongs to a different tape")
        if output.value.size != 1:
            raise ContractViolation(f"backward needs a scalar output, got shape {output.value.shape}")

        adjoints: List[Optional[np.ndarray]] = [None] * len(self.nodes)
        adjoints[output.index] = np.ones_like(output.value)

        for index in range(output.index, -1, -1):
            adjoint = adjoints[index]
            if adjoint is None:
                continue
            node = self.nodes[index]
            for parent, vjp in zip(node.parents, node.vjps):
                contribution = vjp(adjoint)
                if adjoints[parent] is None:
                    adjoints[parent] = np.array(contribution, dtype=np.float64)
                else:
                    adjoints[parent] = adjoints[parent] + contribution

        self.adjoints = adjoints
        return adjoints

    def gradient(self, output: "Var", wrt: Mapping[str, "Var"]) -> Dict[str, np.ndarray]:
        """
        Gradients of a scalar output with respect to named leaves.

        Leaves the output does not depend on get a zero gradient.
        """
        adjoints = self.backward(output)
        grads = {}
        for name, var in wrt.items():
            adjoint = adjoints[var.index] if var.index < len(adjoints) else None
            grads[name] = np.zeros_like(var.value) if adjoint is None else adjoint.reshape(var.value.shape)
        return grads


class Var:
    """Handle to a value recorded on a tape. Arithmetic operators record new nodes."""

    __slots__ = ("tape", "index")

    # numpy must defer to our reflected operators instead of broadcasting over objects
    __array_ufunc__ = None

    def __init__(self, tape: Tape, index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.index].value

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    def __len__(self) -> int:
        return self.value.shape[0]

    def __float__(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        node = self.tape.nodes[self.index]
        return f"Var({node.op}, shape={self.value.shape})"


def evaluate_with_gradients(
    expr: Callable[[Dict[str, Var]], Any],
    params: Mapping[str, Any]
) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Evaluate a scalar expression and its exact reverse-mode gradients.

    Args:
        expr: Function of a mapping name -> tape variable returning a scalar
        params: Named parameter values

    Returns:
        (value, grads) with one gradient array per parameter
    """
    tape = Tape()
    variables = {name: tape.variable(value, name=name) for name, value in params.items()}
    output = expr(variables)
    if not isinstance(output, Var):
        return float(np.asarray(output)), {name: np.zeros_like(v.value) for name, v in variables.items()}
    grads = tape.gradient(output, variables)
    return float(output.value), grads


def jacobian(fn: Callable[[Var], Any], x: Any) -> np.ndarray:
    """
    Jacobian of a vector function by one forward pass and one reverse sweep per output.

    Args:
        fn: Function mapping an n-vector variable to an m-vector
        x: Point of evaluation (n,)

    Returns:
        (m, n) array
    """
    from . import ops

    tape = Tape()
    xv = tape.variable(x, name="x")
    y = fn(xv)
    if not isinstance(y, Var):
        return np.zeros((np.size(y), xv.size))
    rows = []
    for i in range(y.size):
        yi = ops.getitem(ops.reshape(y, (-1,)), i)
        rows.append(tape.gradient(yi, {"x": xv})["x"].ravel())
    return np.vstack(rows)

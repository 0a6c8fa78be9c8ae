"""
Element-wise (marginal) flows.

Each flow is a strictly increasing scalar map applied to every coordinate
of its input with parameters shared across coordinates. Parameters that
must be positive are stored unconstrained and passed through softplus.
"""

from __future__ import annotations

from typing import Any, Callable, Dict, Mapping, Optional, Type

import numpy as np
from scipy.special import expit

from src.autodiff import ops
from src.autodiff.layers import softplus_inverse
from src.autodiff.parametrized import Parametrized
from src.utils.errors import ConfigurationError, FlowDomainError, InversionError

INVERSION_TOL = 1e-10
INVERSION_MAX_ITER = 200
_MAX_BRACKET_DOUBLINGS = 64


def solve_monotone(
    fn: Callable[[np.ndarray], np.ndarray],
    dfn: Callable[[np.ndarray], np.ndarray],
    y: Any,
    tol: float = INVERSION_TOL,
    max_iter: int = INVERSION_MAX_ITER
) -> np.ndarray:
    """
    Invert an increasing scalar map element-wise.

    Safeguarded Newton: a bracket [lo, hi] with fn(lo) <= y <= fn(hi) is
    grown by doubling, then Newton steps that leave the bracket are replaced
    by bisection.

    Raises:
        InversionError: No bracket found, or the iterates still moving after max_iter
    """
    y = np.asarray(y, dtype=np.float64)
    lo = np.full(y.shape, -1.0)
    hi = np.full(y.shape, 1.0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(_MAX_BRACKET_DOUBLINGS):
            low_bad = fn(lo) > y
            high_bad = fn(hi) < y
            if not (low_bad.any() or high_bad.any()):
                break
            lo = np.where(low_bad, 2.0 * lo, lo)
            hi = np.where(high_bad, 2.0 * hi, hi)
        else:
            gap = np.maximum(fn(lo) - y, 0.0) + np.maximum(y - fn(hi), 0.0)
            raise InversionError("value lies outside the range of the flow", float(np.max(gap)))

        x = 0.5 * (lo + hi)
        for _ in range(max_iter):
            r = fn(x) - y
            hi = np.where(r > 0, x, hi)
            lo = np.where(r <= 0, x, lo)
            d = dfn(x)
            step = x - r / d
            inside = np.isfinite(step) & (step > lo) & (step < hi)
            x_new = np.where(r == 0, x, np.where(inside, step, 0.5 * (lo + hi)))
            # converged in x, not in y: flat tails have tiny residuals far from the root
            moved = np.abs(x_new - x)
            x = x_new
            if np.all((r == 0) | (moved <= tol * np.maximum(1.0, np.abs(x)))):
                return x

    residual = float(np.max(np.abs(fn(x) - y)))
    raise InversionError(f"no convergence after {max_iter} iterations", residual)


class ElementaryFlow(Parametrized):
    """
    Base class for marginal flows.

    Subclasses set ``KIND``, ``PARAMS`` and ``POSITIVE`` and implement
    ``forward`` and ``log_derivative`` with tape-aware primitives plus a
    numpy ``inverse``.
    """

    KIND = ""
    POSITIVE: tuple = ()
    DEFAULTS: Dict[str, Any] = {}
    # parameters are length-J vectors (one entry per summed term)
    MULTI_TERM = False

    def __init__(self, trainable: bool = True, num_terms: int = 1, **init: Any):
        unknown = set(init) - set(self.PARAMS)
        if unknown:
            raise ConfigurationError(f"{self.KIND} flow has no parameter(s) {sorted(unknown)}")
        for name in self.PARAMS:
            value = np.asarray(init.get(name, self.DEFAULTS[name]), dtype=np.float64)
            if self.MULTI_TERM:
                value = np.broadcast_to(value, (num_terms,)).copy()
            if name in self.POSITIVE:
                if np.any(value <= 0):
                    raise ConfigurationError(f"{self.KIND} flow parameter '{name}' must be positive")
                value = softplus_inverse(value)
            setattr(self, name, value)
        self.frozen = set() if trainable else set(self.PARAMS)

    def p(self, name: str):
        """Constrained value of a parameter (tape variable or array)."""
        raw = getattr(self, name)
        return ops.softplus(raw) if name in self.POSITIVE else raw

    def constrained_values(self) -> Dict[str, np.ndarray]:
        return {name: np.array(ops.value_of(self.p(name))) for name in self.PARAMS}

    def check_domain(self, f: np.ndarray) -> None:
        """Raise FlowDomainError if f lies outside the domain."""

    def forward(self, f):
        raise NotImplementedError

    def log_derivative(self, f):
        """Element-wise log G'(f)."""
        raise NotImplementedError

    def inverse(self, y: Any) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self) -> str:
        values = ", ".join(f"{k}={np.round(v, 4)}" for k, v in self.constrained_values().items())
        return f"{type(self).__name__}({values})"


class ArcsinhFlow(ElementaryFlow):
    """a + b arcsinh(d (f - c)), b, d > 0."""

    KIND = "Arcsinh"
    PARAMS = ("a", "b", "c", "d")
    POSITIVE = ("b", "d")
    DEFAULTS = {"a": 0.0, "b": 1.0, "c": 0.0, "d": 1.0}

    def forward(self, f):
        z = ops.mul(self.p("d"), ops.sub(f, self.p("c")))
        return ops.add(self.p("a"), ops.mul(self.p("b"), ops.arcsinh(z)))

    def log_derivative(self, f):
        z = ops.mul(self.p("d"), ops.sub(f, self.p("c")))
        scale = ops.add(ops.log(self.p("b")), ops.log(self.p("d")))
        return ops.sub(scale, ops.mul(0.5, ops.log(ops.add(1.0, ops.square(z)))))

    def inverse(self, y):
        v = self.constrained_values()
        return v["c"] + np.sinh((np.asarray(y) - v["a"]) / v["b"]) / v["d"]


class LogFlow(ElementaryFlow):
    """log(f) on f > 0."""

    KIND = "Log"
    PARAMS = ()

    def check_domain(self, f):
        if np.any(f <= 0):
            raise FlowDomainError(f"log of non-positive value (min {float(np.min(f)):.4g})", kind=self.KIND)

    def forward(self, f):
        return ops.log(f)

    def log_derivative(self, f):
        return ops.neg(ops.log(f))

    def inverse(self, y):
        return np.exp(np.asarray(y, dtype=np.float64))


class ExpFlow(ElementaryFlow):
    """exp(f)."""

    KIND = "Exp"
    PARAMS = ()

    def forward(self, f):
        return ops.exp(f)

    def log_derivative(self, f):
        return ops.add(f, 0.0)

    def inverse(self, y):
        y = np.asarray(y, dtype=np.float64)
        if np.any(y <= 0):
            raise FlowDomainError("inverse of exp needs positive values", kind=self.KIND)
        return np.log(y)


class LinearFlow(ElementaryFlow):
    """a + b f, b > 0."""

    KIND = "Linear"
    PARAMS = ("a", "b")
    POSITIVE = ("b",)
    DEFAULTS = {"a": 0.0, "b": 1.0}

    def forward(self, f):
        return ops.add(self.p("a"), ops.mul(self.p("b"), f))

    def log_derivative(self, f):
        return ops.add(ops.log(self.p("b")), np.zeros(ops.value_of(f).shape))

    def inverse(self, y):
        v = self.constrained_values()
        return (np.asarray(y) - v["a"]) / v["b"]


class SinhArcsinhFlow(ElementaryFlow):
    """sinh(b arcsinh(f) - a), b > 0."""

    KIND = "SinhArcsinh"
    PARAMS = ("a", "b")
    POSITIVE = ("b",)
    DEFAULTS = {"a": 0.0, "b": 1.0}

    def _inner(self, f):
        return ops.sub(ops.mul(self.p("b"), ops.arcsinh(f)), self.p("a"))

    def forward(self, f):
        return ops.sinh(self._inner(f))

    def log_derivative(self, f):
        w = self._inner(f)
        out = ops.add(ops.log(ops.cosh(w)), ops.log(self.p("b")))
        return ops.sub(out, ops.mul(0.5, ops.log(ops.add(1.0, ops.square(f)))))

    def inverse(self, y):
        v = self.constrained_values()
        return np.sinh((np.arcsinh(np.asarray(y)) + v["a"]) / v["b"])


class SalFlow(ElementaryFlow):
    """Sinh-arcsinh-linear: d sinh(b arcsinh(f) - a) + c, b, d > 0."""

    KIND = "SAL"
    PARAMS = ("a", "b", "c", "d")
    POSITIVE = ("b", "d")
    DEFAULTS = {"a": 0.0, "b": 1.0, "c": 0.0, "d": 1.0}

    def _inner(self, f):
        return ops.sub(ops.mul(self.p("b"), ops.arcsinh(f)), self.p("a"))

    def forward(self, f):
        return ops.add(ops.mul(self.p("d"), ops.sinh(self._inner(f))), self.p("c"))

    def log_derivative(self, f):
        w = self._inner(f)
        out = ops.add(ops.log(ops.cosh(w)), ops.add(ops.log(self.p("b")), ops.log(self.p("d"))))
        return ops.sub(out, ops.mul(0.5, ops.log(ops.add(1.0, ops.square(f)))))

    def inverse(self, y):
        v = self.constrained_values()
        inner = np.arcsinh((np.asarray(y) - v["c"]) / v["d"])
        return np.sinh((inner + v["a"]) / v["b"])


class BoxCoxFlow(ElementaryFlow):
    """(f^lambda - 1) / lambda on f > 0, lambda > 0."""

    KIND = "BoxCox"
    PARAMS = ("lam",)
    POSITIVE = ("lam",)
    DEFAULTS = {"lam": 1.0}

    def check_domain(self, f):
        if np.any(f <= 0):
            raise FlowDomainError(f"Box-Cox of non-positive value (min {float(np.min(f)):.4g})", kind=self.KIND)

    def forward(self, f):
        lam = self.p("lam")
        return ops.div(ops.sub(ops.exp(ops.mul(lam, ops.log(f))), 1.0), lam)

    def log_derivative(self, f):
        return ops.mul(ops.sub(self.p("lam"), 1.0), ops.log(f))

    def inverse(self, y):
        lam = self.constrained_values()["lam"]
        base = lam * np.asarray(y, dtype=np.float64) + 1.0
        if np.any(base <= 0):
            raise FlowDomainError("value outside the range of the Box-Cox flow", kind=self.KIND)
        return base ** (1.0 / lam)


class TanhFlow(ElementaryFlow):
    """a tanh(b (f + c)) + d, a, b > 0. Bounded output in (d - a, d + a)."""

    KIND = "Tanh"
    PARAMS = ("a", "b", "c", "d")
    POSITIVE = ("a", "b")
    DEFAULTS = {"a": 10.0, "b": 0.1, "c": 0.0, "d": 0.0}

    def forward(self, f):
        t = ops.tanh(ops.mul(self.p("b"), ops.add(f, self.p("c"))))
        return ops.add(ops.mul(self.p("a"), t), self.p("d"))

    def log_derivative(self, f):
        t = ops.tanh(ops.mul(self.p("b"), ops.add(f, self.p("c"))))
        out = ops.add(ops.log(self.p("a")), ops.log(self.p("b")))
        return ops.add(out, ops.log(ops.sub(1.0, ops.square(t))))

    def inverse(self, y):
        v = self.constrained_values()
        z = (np.asarray(y, dtype=np.float64) - v["d"]) / v["a"]
        if np.any(np.abs(z) >= 1.0):
            raise FlowDomainError("value outside the range of the Tanh flow", kind=self.KIND)
        return np.arctanh(z) / v["b"] - v["c"]


class SumOfTanhFlow(ElementaryFlow):
    """f + sum_j a_j tanh(b_j (f + c_j)), a_j, b_j > 0."""

    KIND = "SumOfTanh"
    PARAMS = ("a", "b", "c")
    POSITIVE = ("a", "b")
    DEFAULTS = {"a": 0.1, "b": 1.0, "c": 0.0}
    MULTI_TERM = True

    def _args(self, f):
        shape = ops.value_of(f).shape
        fe = ops.reshape(f, shape + (1,))
        return ops.mul(self.p("b"), ops.add(fe, self.p("c")))

    def forward(self, f):
        terms = ops.mul(self.p("a"), ops.tanh(self._args(f)))
        return ops.add(f, ops.sum(terms, axis=-1))

    def log_derivative(self, f):
        t = ops.tanh(self._args(f))
        slope = ops.mul(ops.mul(self.p("a"), self.p("b")), ops.sub(1.0, ops.square(t)))
        return ops.log(ops.add(1.0, ops.sum(slope, axis=-1)))

    def inverse(self, y):
        v = self.constrained_values()
        a, b, c = v["a"], v["b"], v["c"]

        def fn(x):
            return x + np.sum(a * np.tanh(b * (x[..., None] + c)), axis=-1)

        def dfn(x):
            t = np.tanh(b * (x[..., None] + c))
            return 1.0 + np.sum(a * b * (1.0 - t * t), axis=-1)

        return solve_monotone(fn, dfn, y)


class SumOfLogExpFlow(ElementaryFlow):
    """sum_j a_j log(1 + exp(b_j (f + c_j))), a_j, b_j > 0. Range (0, inf)."""

    KIND = "SumOfLogExp"
    PARAMS = ("a", "b", "c")
    POSITIVE = ("a", "b")
    DEFAULTS = {"a": 1.0, "b": 1.0, "c": 0.0}
    MULTI_TERM = True

    def _args(self, f):
        shape = ops.value_of(f).shape
        fe = ops.reshape(f, shape + (1,))
        return ops.mul(self.p("b"), ops.add(fe, self.p("c")))

    def forward(self, f):
        return ops.sum(ops.mul(self.p("a"), ops.softplus(self._args(f))), axis=-1)

    def log_derivative(self, f):
        # log sigmoid(z) = -softplus(-z) stays finite deep in the left tail
        log_scale = ops.add(ops.log(self.p("a")), ops.log(self.p("b")))
        log_slope = ops.sub(log_scale, ops.softplus(ops.neg(self._args(f))))
        return ops.logsumexp(log_slope, axis=-1)

    def inverse(self, y):
        y = np.asarray(y, dtype=np.float64)
        if np.any(y <= 0):
            raise FlowDomainError("value outside the range of the SumOfLogExp flow", kind=self.KIND)
        v = self.constrained_values()
        a, b, c = v["a"], v["b"], v["c"]

        # solved on the log scale, where the left tail is close to linear
        def fn(x):
            return np.log(np.sum(a * np.logaddexp(0.0, b * (x[..., None] + c)), axis=-1))

        def dfn(x):
            z = b * (x[..., None] + c)
            return np.sum(a * b * expit(z), axis=-1) / np.sum(a * np.logaddexp(0.0, z), axis=-1)

        return solve_monotone(fn, dfn, np.log(y))


FLOW_KINDS: Dict[str, Type[ElementaryFlow]] = {
    cls.KIND.lower(): cls
    for cls in (
        ArcsinhFlow, LogFlow, ExpFlow, LinearFlow, SinhArcsinhFlow,
        BoxCoxFlow, TanhFlow, SalFlow, SumOfTanhFlow, SumOfLogExpFlow,
    )
}


def make_elementary_flow(
    kind: str,
    init: Optional[Mapping[str, Any]] = None,
    trainable: bool = True,
    num_terms: int = 1
) -> ElementaryFlow:
    """
    Construct an elementary flow by kind name (case-insensitive).

    Raises:
        ConfigurationError: Unknown kind or invalid initial values
    """
    cls = FLOW_KINDS.get(kind.lower().replace("-", "").replace("_", ""))
    if cls is None:
        raise ConfigurationError(f"unknown flow kind '{kind}'; expected one of {sorted(c.KIND for c in FLOW_KINDS.values())}")
    return cls(trainable=trainable, num_terms=num_terms, **dict(init or {}))

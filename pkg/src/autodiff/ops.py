"""
Differentiable primitives.

Every primitive accepts tape variables or plain numpy arrays. When no input
is a tape variable the primitive evaluates with numpy and returns an array,
so the same model code runs with or without gradient tracking.
"""

from __future__ import annotations

from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy import linalg as sla
from scipy.special import expit
from scipy.special import logsumexp as _logsumexp

from src.utils.errors import ContractViolation, DecompositionError, NumericError
from .tape import Tape, Var


def value_of(x: Any) -> np.ndarray:
    """Forward value of a variable or array-like."""
    if isinstance(x, Var):
        return x.value
    return np.asarray(x, dtype=np.float64)


def is_tracked(x: Any) -> bool:
    return isinstance(x, Var)


def _tape_of(inputs: Sequence[Any]) -> Optional[Tape]:
    tape = None
    for x in inputs:
        if isinstance(x, Var):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise ContractViolation("inputs are recorded on different tapes")
    return tape


def _record(
    op: str,
    value: np.ndarray,
    inputs: Sequence[Any],
    vjps: Sequence[Optional[Callable[[np.ndarray], np.ndarray]]],
    name: Optional[str] = None
):
    value = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(value)):
        raise NumericError(f"non-finite value produced by {op}", node=name or op)
    tape = _tape_of(inputs)
    if tape is None:
        return value
    parents, fns = [], []
    for x, fn in zip(inputs, vjps):
        if isinstance(x, Var) and fn is not None:
            parents.append(x.index)
            fns.append(fn)
    return tape._push(op, value, tuple(parents), tuple(fns), name)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    grad = np.asarray(grad)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _swap(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


# ---------------------------------------------------------------------------
# Arithmetic
# ---------------------------------------------------------------------------

def add(a, b):
    va, vb = value_of(a), value_of(b)
    return _record("add", va + vb, (a, b), (
        lambda g: _unbroadcast(g, va.shape),
        lambda g: _unbroadcast(g, vb.shape),
    ))


def sub(a, b):
    va, vb = value_of(a), value_of(b)
    return _record("sub", va - vb, (a, b), (
        lambda g: _unbroadcast(g, va.shape),
        lambda g: _unbroadcast(-g, vb.shape),
    ))


def mul(a, b):
    va, vb = value_of(a), value_of(b)
    return _record("mul", va * vb, (a, b), (
        lambda g: _unbroadcast(g * vb, va.shape),
        lambda g: _unbroadcast(g * va, vb.shape),
    ))


def div(a, b):
    va, vb = value_of(a), value_of(b)
    out = va / vb
    return _record("div", out, (a, b), (
        lambda g: _unbroadcast(g / vb, va.shape),
        lambda g: _unbroadcast(-g * out / vb, vb.shape),
    ))


def neg(a):
    va = value_of(a)
    return _record("neg", -va, (a,), (lambda g: -g,))


def power(a, exponent: float):
    va = value_of(a)
    exponent = float(exponent)
    return _record("power", va ** exponent, (a,), (
        lambda g: g * exponent * va ** (exponent - 1.0),
    ))


def square(a):
    va = value_of(a)
    return _record("square", va * va, (a,), (lambda g: 2.0 * g * va,))


def sqrt(a):
    va = value_of(a)
    out = np.sqrt(va)
    return _record("sqrt", out, (a,), (lambda g: 0.5 * g / out,))


# ---------------------------------------------------------------------------
# Elementwise transcendental functions
# ---------------------------------------------------------------------------

def exp(a):
    va = value_of(a)
    out = np.exp(va)
    return _record("exp", out, (a,), (lambda g: g * out,))


def log(a, name: Optional[str] = None):
    va = value_of(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(va)
    return _record("log", out, (a,), (lambda g: g / va,), name=name)


def tanh(a):
    va = value_of(a)
    out = np.tanh(va)
    return _record("tanh", out, (a,), (lambda g: g * (1.0 - out * out),))


def sinh(a):
    va = value_of(a)
    return _record("sinh", np.sinh(va), (a,), (lambda g: g * np.cosh(va),))


def cosh(a):
    va = value_of(a)
    return _record("cosh", np.cosh(va), (a,), (lambda g: g * np.sinh(va),))


def arcsinh(a):
    va = value_of(a)
    return _record("arcsinh", np.arcsinh(va), (a,), (
        lambda g: g / np.sqrt(1.0 + va * va),
    ))


def softplus(a):
    va = value_of(a)
    return _record("softplus", np.logaddexp(0.0, va), (a,), (lambda g: g * expit(va),))


def sigmoid(a):
    va = value_of(a)
    out = expit(va)
    return _record("sigmoid", out, (a,), (lambda g: g * out * (1.0 - out),))


def clip_min(a, lower: float):
    """max(a, lower) element-wise; no gradient where the bound is active."""
    va = value_of(a)
    keep = va > lower
    return _record("clip_min", np.where(keep, va, lower), (a,), (lambda g: g * keep,))


def absolute(a):
    va = value_of(a)
    return _record("abs", np.abs(va), (a,), (lambda g: g * np.sign(va),))


# ---------------------------------------------------------------------------
# Shape manipulation and reductions
# ---------------------------------------------------------------------------

def reshape(a, shape):
    va = value_of(a)
    return _record("reshape", va.reshape(shape), (a,), (lambda g: g.reshape(va.shape),))


def swapaxes(a, axis1: int = -1, axis2: int = -2):
    va = value_of(a)
    return _record("transpose", np.swapaxes(va, axis1, axis2), (a,), (
        lambda g: np.swapaxes(g, axis1, axis2),
    ))


def transpose(a):
    """Swap the last two axes."""
    return swapaxes(a, -1, -2)


def sum(a, axis=None, keepdims: bool = False):
    va = value_of(a)
    out = np.sum(va, axis=axis, keepdims=keepdims)

    def vjp(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, va.shape).copy()

    return _record("sum", out, (a,), (vjp,))


def logsumexp(a, axis: int = -1):
    """log sum exp along one axis, stable for very negative inputs."""
    va = value_of(a)
    out = _logsumexp(va, axis=axis)

    def vjp(g):
        weights = np.exp(va - np.expand_dims(out, axis))
        return np.expand_dims(np.asarray(g), axis) * weights

    return _record("logsumexp", out, (a,), (vjp,))


def mean(a, axis=None, keepdims: bool = False):
    va = value_of(a)
    count = va.size if axis is None else np.prod([va.shape[ax] for ax in np.atleast_1d(axis)])
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / float(count))


def getitem(a, index):
    va = value_of(a)

    def vjp(g):
        out = np.zeros_like(va)
        np.add.at(out, index, g)
        return out

    return _record("getitem", np.array(va[index]), (a,), (vjp,))


def concatenate(items: Sequence[Any], axis: int = -1):
    values = [value_of(x) for x in items]
    out = np.concatenate(values, axis=axis)
    ax = axis % out.ndim
    bounds = np.cumsum([v.shape[ax] for v in values])[:-1]

    def make_vjp(k):
        return lambda g: np.split(g, bounds, axis=ax)[k]

    return _record("concatenate", out, tuple(items), tuple(make_vjp(k) for k in range(len(items))))


def stack(items: Sequence[Any], axis: int = 0):
    expanded = []
    for x in items:
        shape = list(value_of(x).shape)
        ax = axis if axis >= 0 else len(shape) + 1 + axis
        shape.insert(ax, 1)
        expanded.append(reshape(x, tuple(shape)))
    return concatenate(expanded, axis=axis)


def diagonal(a):
    """Diagonal of the last two axes."""
    va = value_of(a)
    n = va.shape[-1]
    idx = np.arange(n)

    def vjp(g):
        out = np.zeros_like(va)
        out[..., idx, idx] = g
        return out

    return _record("diagonal", np.array(va[..., idx, idx]), (a,), (vjp,))


def diag_embed(v):
    """Square matrix (over the last axis) with v on the diagonal."""
    vv = value_of(v)
    n = vv.shape[-1]
    idx = np.arange(n)
    out = np.zeros(vv.shape + (n,))
    out[..., idx, idx] = vv
    return _record("diag_embed", out, (v,), (lambda g: np.array(g[..., idx, idx]),))


def trace(a):
    va = value_of(a)
    n = va.shape[-1]
    return _record("trace", np.trace(va, axis1=-2, axis2=-1), (a,), (
        lambda g: np.asarray(g)[..., None, None] * np.eye(n),
    ))


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------

def matmul(a, b):
    va, vb = value_of(a), value_of(b)
    if va.ndim == 1 and vb.ndim == 1:
        return sum(mul(a, b))
    if va.ndim == 1:
        out_shape = (va @ vb).shape
        return reshape(matmul(reshape(a, (1, -1)), b), out_shape)
    if vb.ndim == 1:
        out_shape = (va @ vb).shape
        return reshape(matmul(a, reshape(b, (-1, 1))), out_shape)
    return _record("matmul", va @ vb, (a, b), (
        lambda g: _unbroadcast(g @ _swap(vb), va.shape),
        lambda g: _unbroadcast(_swap(va) @ g, vb.shape),
    ))


def _phi(x: np.ndarray) -> np.ndarray:
    """Lower triangle with the diagonal halved."""
    out = np.tril(x)
    out[np.diag_indices_from(out)] *= 0.5
    return out


def cholesky(a, name: Optional[str] = None):
    """Lower Cholesky factor of a symmetric positive-definite matrix."""
    va = value_of(a)
    if va.ndim != 2:
        raise ContractViolation(f"cholesky expects a matrix, got shape {va.shape}")
    try:
        chol = np.linalg.cholesky(va)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"matrix is not positive definite ({exc})", node=name or "cholesky")

    def vjp(g):
        # entries above the diagonal of the factor are structural zeros
        p = _phi(chol.T @ np.tril(g))
        y = sla.solve_triangular(chol, p, lower=True, trans="T")
        s = sla.solve_triangular(chol, y.T, lower=True, trans="T").T
        return 0.5 * (s + s.T)

    return _record("cholesky", chol, (a,), (vjp,), name=name)


def solve_triangular(a, b, lower: bool = True, name: Optional[str] = None):
    """Solve a X = b for triangular a (2-D) and a vector or matrix b."""
    va, vb = value_of(a), value_of(b)
    x = sla.solve_triangular(va, vb, lower=lower, check_finite=False)
    mask = np.tril if lower else np.triu

    def vjp_b(g):
        return sla.solve_triangular(va, g, lower=lower, trans="T", check_finite=False)

    def vjp_a(g):
        gb = vjp_b(g)
        if gb.ndim == 1:
            return -mask(np.outer(gb, x))
        return -mask(gb @ x.T)

    return _record("solve_triangular", x, (a, b), (vjp_a, vjp_b), name=name)


def logdet(a, name: Optional[str] = None):
    """log |det a| for a matrix with positive determinant."""
    va = value_of(a)
    sign, value = np.linalg.slogdet(va)
    if sign <= 0:
        raise NumericError("log-det of a matrix with non-positive determinant", node=name or "logdet")
    return _record("logdet", value, (a,), (lambda g: g * np.linalg.inv(va).T,), name=name)


# ---------------------------------------------------------------------------
# Operator overloading on tape variables
# ---------------------------------------------------------------------------

def _install_operators():
    Var.__add__ = lambda self, other: add(self, other)
    Var.__radd__ = lambda self, other: add(other, self)
    Var.__sub__ = lambda self, other: sub(self, other)
    Var.__rsub__ = lambda self, other: sub(other, self)
    Var.__mul__ = lambda self, other: mul(self, other)
    Var.__rmul__ = lambda self, other: mul(other, self)
    Var.__truediv__ = lambda self, other: div(self, other)
    Var.__rtruediv__ = lambda self, other: div(other, self)
    Var.__neg__ = lambda self: neg(self)
    Var.__pow__ = lambda self, exponent: power(self, exponent)
    Var.__matmul__ = lambda self, other: matmul(self, other)
    Var.__rmatmul__ = lambda self, other: matmul(other, self)
    Var.__getitem__ = lambda self, index: getitem(self, index)
    Var.T = property(lambda self: transpose(self))
    Var.sum = lambda self, axis=None, keepdims=False: sum(self, axis=axis, keepdims=keepdims)
    Var.reshape = lambda self, *shape: reshape(self, shape[0] if len(shape) == 1 else shape)


_install_operators()

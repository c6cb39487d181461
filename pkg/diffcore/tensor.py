"""
Define-by-run reverse-mode automatic differentiation over numpy arrays.

Every operation returns a new `Value`. While gradient recording is enabled
the result remembers its parents and one vector-Jacobian function per
parent; `Value.backward()` walks that graph in reverse topological order
and accumulates `grad` into every reachable node.
"""

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from utils.error_handler import ShapeError

ArrayLike = Union["Value", np.ndarray, float, int]

_node_ids = itertools.count()
_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording in this thread (inference / finite differences)."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Value:
    """A differentiable array node."""

    __slots__ = ("data", "_grad", "_parents", "_vjps", "node_id", "name")

    def __init__(self, data, name: Optional[str] = None):
        array = np.asarray(data)
        if array.dtype.kind not in "f":
            array = array.astype(np.float64)
        self.data = array
        self._grad = None
        self._parents: Tuple["Value", ...] = ()
        self._vjps: Tuple[Optional[Callable], ...] = ()
        self.node_id = next(_node_ids)
        self.name = name

    # ── bookkeeping ────────────────────────────────────────
    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            return np.zeros_like(self.data)
        return self._grad

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self) -> None:
        self._grad = None

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def _accumulate(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match value shape {self.data.shape}")
        if self._grad is None:
            self._grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self._grad = self._grad + g

    def backward(self) -> None:
        """Accumulate d(self)/d(node) into every node reachable from this scalar."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar root, got shape {self.data.shape}")

        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if node.node_id in visited:
                continue
            visited.add(node.node_id)
            stack.append((node, True))
            for parent in node._parents:
                if parent.node_id not in visited:
                    stack.append((parent, False))

        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if not node._parents or node._grad is None:
                continue
            g = node._grad
            for parent, vjp in zip(node._parents, node._vjps):
                if vjp is not None:
                    parent._accumulate(vjp(g))

    # ── operators ──────────────────────────────────────────
    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __truediv__(self, other): return div(self, other)
    def __rtruediv__(self, other): return div(other, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, other): return matmul(self, other)
    def __pow__(self, exponent: float): return power(self, exponent)
    def __getitem__(self, index): return getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False): return vsum(self, axis, keepdims)
    def mean(self, axis=None, keepdims: bool = False): return vmean(self, axis, keepdims)

    def __repr__(self) -> str:
        return f"Value(shape={self.data.shape}, data={self.data!r})"


def as_value(x: ArrayLike) -> Value:
    return x if isinstance(x, Value) else Value(x)


def _pair(a: ArrayLike, b: ArrayLike) -> Tuple[Value, Value]:
    """Wrap operands; a bare constant takes the dtype of the Value it meets."""
    if isinstance(a, Value) and not isinstance(b, Value):
        return a, Value(np.asarray(b, dtype=a.dtype))
    if isinstance(b, Value) and not isinstance(a, Value):
        return Value(np.asarray(a, dtype=b.dtype)), b
    return as_value(a), as_value(b)


def _result(data: np.ndarray, parents: Sequence[Value], vjps: Sequence[Optional[Callable]]) -> Value:
    out = Value(data)
    if is_grad_enabled():
        out._parents = tuple(parents)
        out._vjps = tuple(vjps)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# ── elementwise binary ─────────────────────────────────────
def add(a: ArrayLike, b: ArrayLike) -> Value:
    a, b = _pair(a, b)
    return _result(a.data + b.data, (a, b), (
        lambda g: _unbroadcast(g, a.shape),
        lambda g: _unbroadcast(g, b.shape),
    ))


def sub(a: ArrayLike, b: ArrayLike) -> Value:
    a, b = _pair(a, b)
    return _result(a.data - b.data, (a, b), (
        lambda g: _unbroadcast(g, a.shape),
        lambda g: _unbroadcast(-g, b.shape),
    ))


def mul(a: ArrayLike, b: ArrayLike) -> Value:
    a, b = _pair(a, b)
    return _result(a.data * b.data, (a, b), (
        lambda g: _unbroadcast(g * b.data, a.shape),
        lambda g: _unbroadcast(g * a.data, b.shape),
    ))


def div(a: ArrayLike, b: ArrayLike) -> Value:
    a, b = _pair(a, b)
    return _result(a.data / b.data, (a, b), (
        lambda g: _unbroadcast(g / b.data, a.shape),
        lambda g: _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
    ))


def neg(a: ArrayLike) -> Value:
    a = as_value(a)
    return _result(-a.data, (a,), (lambda g: -g,))


def power(a: ArrayLike, exponent: float) -> Value:
    a = as_value(a)
    p = float(exponent)
    return _result(a.data ** p, (a,), (lambda g: g * p * a.data ** (p - 1.0),))


def square(a: ArrayLike) -> Value:
    a = as_value(a)
    return _result(a.data * a.data, (a,), (lambda g: g * 2.0 * a.data,))


# ── linear algebra ─────────────────────────────────────────
def matmul(a: ArrayLike, b: ArrayLike) -> Value:
    """x @ W for x of shape (in,) or (batch, in) and W of shape (in, out)."""
    a, b = as_value(a), as_value(b)
    if b.ndim != 2 or a.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    if a.ndim == 1:
        return _result(a.data @ b.data, (a, b), (
            lambda g: b.data @ g,
            lambda g: np.outer(a.data, g),
        ))
    return _result(a.data @ b.data, (a, b), (
        lambda g: g @ b.data.T,
        lambda g: a.data.T @ g,
    ))


# ── elementwise unary ──────────────────────────────────────
def exp(a: ArrayLike) -> Value:
    a = as_value(a)
    out = np.exp(a.data)
    return _result(out, (a,), (lambda g: g * out,))


def log(a: ArrayLike) -> Value:
    a = as_value(a)
    return _result(np.log(a.data), (a,), (lambda g: g / a.data,))


def tanh(a: ArrayLike) -> Value:
    a = as_value(a)
    out = np.tanh(a.data)
    return _result(out, (a,), (lambda g: g * (1.0 - out * out),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


def sigmoid(a: ArrayLike) -> Value:
    a = as_value(a)
    out = _sigmoid(a.data)
    return _result(out, (a,), (lambda g: g * out * (1.0 - out),))


def softplus(a: ArrayLike) -> Value:
    a = as_value(a)
    return _result(np.logaddexp(0.0, a.data), (a,), (lambda g: g * _sigmoid(a.data),))


def elu(a: ArrayLike) -> Value:
    a = as_value(a)
    positive = a.data > 0
    out = np.where(positive, a.data, np.expm1(np.minimum(a.data, 0.0)))
    return _result(out, (a,), (lambda g: g * np.where(positive, 1.0, out + 1.0),))


# ── reductions and reshaping ───────────────────────────────
def vsum(a: ArrayLike, axis=None, keepdims: bool = False) -> Value:
    a = as_value(a)
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.array(np.broadcast_to(g, a.shape))

    return _result(np.asarray(out), (a,), (vjp,))


def vmean(a: ArrayLike, axis=None, keepdims: bool = False) -> Value:
    a = as_value(a)
    count = a.data.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])
    return div(vsum(a, axis, keepdims), float(count))


def concat(values: Sequence[ArrayLike], axis: int = -1) -> Value:
    vals = [as_value(v) for v in values]
    out = np.concatenate([v.data for v in vals], axis=axis)
    bounds = np.cumsum([0] + [v.shape[axis] for v in vals])

    def make_vjp(start, stop):
        def vjp(g):
            index = [slice(None)] * g.ndim
            index[axis] = slice(start, stop)
            return g[tuple(index)]
        return vjp

    return _result(out, vals, [make_vjp(bounds[i], bounds[i + 1]) for i in range(len(vals))])


def getitem(a: ArrayLike, index) -> Value:
    a = as_value(a)

    def vjp(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return full

    return _result(np.array(a.data[index]), (a,), (vjp,))


def reshape(a: ArrayLike, shape: tuple) -> Value:
    a = as_value(a)
    return _result(a.data.reshape(shape), (a,), (lambda g: g.reshape(a.shape),))


def stop_gradient(x: ArrayLike) -> Value:
    """Identity forward; no gradient flows back into `x`'s subgraph."""
    x = as_value(x)
    return Value(x.data)

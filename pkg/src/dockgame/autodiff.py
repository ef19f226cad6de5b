"""Minimal reverse-mode automatic differentiation over numpy float64 arrays.

A :class:`Tensor` wraps an ndarray and records the operation that produced
it. Calling :func:`backward` on a scalar result walks the recorded tape in
reverse topological order and accumulates gradients into every tensor
created with ``requires_grad=True``.

Everything runs in double precision. Inside a :func:`no_grad` block no
graph is recorded, which makes pure inference cheap.
"""

import contextlib

import numpy as np

from . import kernels

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording within the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    # defer mixed ndarray/Tensor arithmetic to the reflected operators
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; scalars and ndarrays are promoted to constants
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _track(*parents):
    return _grad_enabled and any(p.requires_grad or p._parents for p in parents)


def _make(data, parents, backward):
    if _grad_enabled and backward is not None:
        return Tensor(data, _parents=parents, _backward=backward)
    return Tensor(data)


def _unbroadcast(grad, shape):
    """Reduce ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _accum(t, g):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def bwd(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape))

    return _make(out, (a, b), bwd if _track(a, b) else None)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def bwd(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape))

    return _make(out, (a, b), bwd if _track(a, b) else None)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def bwd(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _make(out, (a, b), bwd if _track(a, b) else None)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def bwd(g):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return _make(out, (a, b), bwd if _track(a, b) else None)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data @ b.data

    def bwd(g):
        return (g @ b.data.T, a.data.T @ g)

    return _make(out, (a, b), bwd if _track(a, b) else None)


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return _make(out, (a,), bwd if _track(a) else None)


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a, shape):
    a = as_tensor(a)
    out = a.data.reshape(shape)

    def bwd(g):
        return (g.reshape(a.data.shape),)

    return _make(out, (a,), bwd if _track(a) else None)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(out, tuple(tensors), bwd if _track(*tensors) else None)


def rows(a, idx):
    """Gather rows ``a[idx]`` along axis 0 (duplicate indices allowed)."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    out = a.data[idx]

    def bwd(g):
        acc = np.zeros_like(a.data)
        if a.data.ndim == 2:
            kernels.scatter_add(acc, idx, np.ascontiguousarray(g))
        else:
            np.add.at(acc, idx, g)
        return (acc,)

    return _make(out, (a,), bwd if _track(a) else None)


def segment_sum(a, idx, num_segments):
    """Sum rows of ``a`` into ``num_segments`` buckets given by ``idx``."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    out = np.zeros((num_segments,) + a.data.shape[1:], dtype=np.float64)
    if a.data.ndim == 2:
        kernels.scatter_add(out, idx, np.ascontiguousarray(a.data))
    else:
        np.add.at(out, idx, a.data)

    def bwd(g):
        return (g[idx],)

    return _make(out, (a,), bwd if _track(a) else None)


def sigmoid(a):
    a = as_tensor(a)
    out = 1.0 / (1.0 + np.exp(-a.data))

    def bwd(g):
        return (g * out * (1.0 - out),)

    return _make(out, (a,), bwd if _track(a) else None)


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)

    def bwd(g):
        return (g * (1.0 - out * out),)

    return _make(out, (a,), bwd if _track(a) else None)


def silu(a):
    a = as_tensor(a)
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = a.data * s

    def bwd(g):
        return (g * s * (1.0 + a.data * (1.0 - s)),)

    return _make(out, (a,), bwd if _track(a) else None)


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)

    def bwd(g):
        return (g * out,)

    return _make(out, (a,), bwd if _track(a) else None)


def log(a):
    a = as_tensor(a)
    out = np.log(a.data)

    def bwd(g):
        return (g / a.data,)

    return _make(out, (a,), bwd if _track(a) else None)


def sqrt(a):
    a = as_tensor(a)
    out = np.sqrt(a.data)

    def bwd(g):
        return (g * 0.5 / out,)

    return _make(out, (a,), bwd if _track(a) else None)


def square(a):
    a = as_tensor(a)
    out = a.data * a.data

    def bwd(g):
        return (2.0 * g * a.data,)

    return _make(out, (a,), bwd if _track(a) else None)


def clip(a, lo, hi):
    """Clamp values; gradient passes through the interior only."""
    a = as_tensor(a)
    out = np.clip(a.data, lo, hi)

    def bwd(g):
        return (g * ((a.data >= lo) & (a.data <= hi)),)

    return _make(out, (a,), bwd if _track(a) else None)


def softmax(a, axis=-1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _make(out, (a,), bwd if _track(a) else None)


def huber_elem(a, delta):
    """Elementwise Huber penalty of the residuals in ``a`` (C1 at |d|=delta)."""
    a = as_tensor(a)
    absd = np.abs(a.data)
    quad = absd <= delta
    out = np.where(quad, 0.5 * a.data * a.data, delta * (absd - 0.5 * delta))

    def bwd(g):
        return (g * np.where(quad, a.data, delta * np.sign(a.data)),)

    return _make(out, (a,), bwd if _track(a) else None)


def dropout(a, p, rng):
    """Inverted dropout; a fresh mask is drawn from ``rng`` per call."""
    if p <= 0.0:
        return a
    a = as_tensor(a)
    mask = (rng.random(a.data.shape) >= p) / (1.0 - p)
    return mul(a, Tensor(mask))


def pairwise_distance(a, b, eps=1e-8):
    """Differentiable dense distance matrix between (n,3) and (m,3) points."""
    a, b = as_tensor(a), as_tensor(b)
    diff = sub(reshape(a, (a.shape[0], 1, 3)), reshape(b, (1, b.shape[0], 3)))
    d2 = tsum(square(diff), axis=2)
    return sqrt(add(d2, eps))


def backward(loss):
    """Accumulate d(loss)/d(t) into ``t.grad`` for every tracked tensor."""
    if loss.data.size != 1:
        raise ValueError("backward expects a scalar loss")
    if not np.isfinite(loss.data):
        raise FloatingPointError("non-finite loss")

    # iterative topological sort; tapes can be deep with inner-loop reuse
    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            _accum(node, g)
        if node._backward is None:
            continue
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None:
                continue
            if id(p) in grads:
                # out-of-place: pg may alias g or a sibling's gradient
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg

"""Minimal reverse-mode autodiff on numpy arrays.

Backward functions are themselves built from Tensor ops, so gradients stay
differentiable: ``grad(..., create_graph=True)`` returns Tensors that can be
differentiated again. That is what makes the exact bilevel meta gradient
(gradient of a loss evaluated after a gradient step) cheap to compute here.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tensor", "as_tensor", "grad", "concat", "relu", "tanh", "mean", "sum_all"]


class Tensor:
    __slots__ = ("data", "_parents", "_vjp")

    def __init__(self, data, parents=(), vjp=None):
        self.data = np.asarray(data, dtype=np.float64)
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.data.shape

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data)

    # operator sugar; scalars are wrapped as constants
    def __add__(self, other):
        return add(self, as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, as_tensor(other))

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, as_tensor(other))

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, as_tensor(-1.0))

    def __truediv__(self, scalar):
        return mul(self, as_tensor(1.0 / float(scalar)))

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))

    def __getitem__(self, key):
        return narrow(self, key)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, leaf={self._vjp is None})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _reduce_to(g: Tensor, shape) -> Tensor:
    """Sum g over axes that were broadcast relative to `shape`."""
    if g.data.shape == tuple(shape):
        return g
    data = g.data
    extra = data.ndim - len(shape)
    axes = tuple(range(extra)) + tuple(
        i + extra for i, s in enumerate(shape) if s == 1 and data.shape[i + extra] != 1
    )
    out = Tensor(data.sum(axis=axes, keepdims=False).reshape(shape), (g,), None)
    out._vjp = lambda gg: (broadcast_to(gg, data.shape),)
    return out


def broadcast_to(t: Tensor, shape) -> Tensor:
    if t.data.shape == tuple(shape):
        return t
    out = Tensor(np.broadcast_to(t.data, shape).copy(), (t,), None)
    out._vjp = lambda g: (_reduce_to(g, t.data.shape),)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, (a, b), None)
    out._vjp = lambda g: (_reduce_to(g, a.data.shape), _reduce_to(g, b.data.shape))
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data, (a, b), None)
    out._vjp = lambda g: (_reduce_to(g, a.data.shape),
                          _reduce_to(mul(g, as_tensor(-1.0)), b.data.shape))
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, (a, b), None)
    out._vjp = lambda g: (_reduce_to(mul(g, b), a.data.shape),
                          _reduce_to(mul(g, a), b.data.shape))
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data @ b.data, (a, b), None)
    out._vjp = lambda g: (matmul(g, transpose(b)), matmul(transpose(a), g))
    return out


def transpose(t: Tensor) -> Tensor:
    out = Tensor(t.data.T, (t,), None)
    out._vjp = lambda g: (transpose(g),)
    return out


def relu(t: Tensor) -> Tensor:
    mask = Tensor((t.data > 0).astype(np.float64))
    out = Tensor(t.data * mask.data, (t,), None)
    out._vjp = lambda g: (mul(g, mask),)
    return out


def tanh(t: Tensor) -> Tensor:
    out = Tensor(np.tanh(t.data), (t,), None)
    out._vjp = lambda g: (mul(g, sub(as_tensor(1.0), mul(out, out))),)
    return out


def square(t: Tensor) -> Tensor:
    out = Tensor(t.data * t.data, (t,), None)
    out._vjp = lambda g: (mul(g, mul(as_tensor(2.0), t)),)
    return out


def sum_all(t: Tensor) -> Tensor:
    out = Tensor(t.data.sum(), (t,), None)
    out._vjp = lambda g: (broadcast_to(g, t.data.shape),)
    return out


def mean(t: Tensor) -> Tensor:
    return mul(sum_all(t), as_tensor(1.0 / t.data.size))


def narrow(t: Tensor, key) -> Tensor:
    out = Tensor(t.data[key], (t,), None)
    out._vjp = lambda g: (_scatter(g, key, t.data.shape),)
    return out


def _scatter(g: Tensor, key, shape) -> Tensor:
    data = np.zeros(shape)
    data[key] = g.data
    out = Tensor(data, (g,), None)
    out._vjp = lambda gg: (narrow(gg, key),)
    return out


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    ax = axis % out_data.ndim
    keys = []
    lo = 0
    for t in tensors:
        hi = lo + t.data.shape[ax]
        keys.append(tuple(slice(None) for _ in range(ax)) + (slice(lo, hi),))
        lo = hi
    out = Tensor(out_data, tuple(tensors), None)
    out._vjp = lambda g: tuple(narrow(g, k) for k in keys)
    return out


def _topo_from(out: Tensor):
    order, seen = [], set()
    stack = [(out, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def grad(out: Tensor, wrt, create_graph: bool = False):
    """Gradients of a scalar Tensor w.r.t. a list of Tensors.

    Returns Tensors (still differentiable) when create_graph=True, plain
    numpy arrays otherwise. Parameters not reachable from `out` get zeros.
    """
    if out.data.size != 1:
        raise ValueError("grad expects a scalar output")
    grads: dict[int, Tensor] = {id(out): Tensor(np.ones_like(out.data))}
    for node in reversed(_topo_from(out)):
        g = grads.get(id(node))
        if g is None or node._vjp is None:
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            prev = grads.get(id(parent))
            grads[id(parent)] = pg if prev is None else add(prev, pg)
    results = []
    for w in wrt:
        g = grads.get(id(w))
        if g is None:
            g = Tensor(np.zeros_like(w.data))
        results.append(g if create_graph else g.data.copy())
    return results

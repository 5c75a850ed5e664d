"""Minimal reverse-mode autodiff on numpy arrays.

Just enough machinery for a dense policy/value network and the clipped
surrogate loss: each op records its parents and a closure that pushes
the output gradient back to them.  ``backward()`` on a scalar Tensor
topologically sorts the recorded graph and accumulates ``.grad`` on
every reachable Tensor that requires gradients.

Broadcasting follows numpy; gradients are summed back over broadcast
axes.  float64 everywhere.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad over axes that were broadcast to produce ``grad.shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_push")

    def __init__(self, data, requires_grad=False, parents=(), push=None):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._push = push

    @property
    def shape(self):
        return self.data.shape

    # -- graph plumbing -------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        order, seen = [], set()

        def visit(t):
            if id(t) in seen or not t.requires_grad:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            order.append(t)

        visit(self)
        for t in order:
            t.grad = np.zeros_like(t.data)
        self.grad = np.ones_like(self.data)
        for t in reversed(order):
            if t._push is not None:
                t._push(t.grad)

    # -- ops -------------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        out_req = self.requires_grad or other.requires_grad

        def push(g):
            if self.requires_grad:
                self.grad += _unbroadcast(g, self.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(g, other.shape)

        return Tensor(self.data + other.data, out_req, (self, other), push)

    __radd__ = __add__

    def __neg__(self):
        def push(g):
            if self.requires_grad:
                self.grad += -g

        return Tensor(-self.data, self.requires_grad, (self,), push)

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        out_req = self.requires_grad or other.requires_grad

        def push(g):
            if self.requires_grad:
                self.grad += _unbroadcast(g * other.data, self.shape)
            if other.requires_grad:
                other.grad += _unbroadcast(g * self.data, other.shape)

        return Tensor(self.data * other.data, out_req, (self, other), push)

    __rmul__ = __mul__

    def __matmul__(self, other):
        other = as_tensor(other)
        out_req = self.requires_grad or other.requires_grad

        def push(g):
            if self.requires_grad:
                self.grad += g @ other.data.T
            if other.requires_grad:
                other.grad += self.data.T @ g

        return Tensor(self.data @ other.data, out_req, (self, other), push)

    def tanh(self):
        out_data = np.tanh(self.data)

        def push(g):
            if self.requires_grad:
                self.grad += g * (1.0 - out_data * out_data)

        return Tensor(out_data, self.requires_grad, (self,), push)

    def exp(self):
        out_data = np.exp(self.data)

        def push(g):
            if self.requires_grad:
                self.grad += g * out_data

        return Tensor(out_data, self.requires_grad, (self,), push)

    def log(self):
        def push(g):
            if self.requires_grad:
                self.grad += g / self.data

        return Tensor(np.log(self.data), self.requires_grad, (self,), push)

    def square(self):
        def push(g):
            if self.requires_grad:
                self.grad += g * 2.0 * self.data

        return Tensor(self.data * self.data, self.requires_grad, (self,), push)

    def clip(self, lo: float, hi: float):
        """Clamp to [lo, hi]; gradient is zero outside the interval."""
        mask = (self.data >= lo) & (self.data <= hi)

        def push(g):
            if self.requires_grad:
                self.grad += g * mask

        return Tensor(np.clip(self.data, lo, hi), self.requires_grad, (self,), push)

    def sum(self, axis=None):
        def push(g):
            if self.requires_grad:
                if axis is None:
                    self.grad += g
                else:
                    self.grad += np.expand_dims(g, axis)

        return Tensor(self.data.sum(axis=axis), self.requires_grad, (self,), push)

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def minimum(a, b) -> Tensor:
    """Elementwise min; at ties the gradient goes to the first argument."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data
    out_req = a.requires_grad or b.requires_grad

    def push(g):
        if a.requires_grad:
            a.grad += _unbroadcast(g * take_a, a.shape)
        if b.requires_grad:
            b.grad += _unbroadcast(g * ~take_a, b.shape)

    return Tensor(np.minimum(a.data, b.data), out_req, (a, b), push)


def softmax(t: Tensor, axis=-1) -> Tensor:
    """Softmax along ``axis`` with the usual max-subtraction guard."""
    z = t.data - np.max(t.data, axis=axis, keepdims=True)
    e = np.exp(z)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def push(g):
        if t.requires_grad:
            inner = (g * out_data).sum(axis=axis, keepdims=True)
            t.grad += out_data * (g - inner)

    return Tensor(out_data, t.requires_grad, (t,), push)

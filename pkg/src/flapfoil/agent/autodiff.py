"""Minimal reverse-mode tape over numpy arrays.

Covers exactly the operations the two fixed network architectures and
their losses need: broadcast add/mul, matmul, tanh/sigmoid/exp/log,
elementwise min/max/clip, powers, and reductions.  Every op closes over
its inputs and appends a backward closure; ``backward()`` topo-sorts
the graph and accumulates ndarray gradients into the leaves.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum grad down to ``shape`` (reverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "_backward", "_prev")

    def __init__(self, data, prev=()):
        self.data = np.asarray(data, dtype=float)
        self.grad = None
        self._backward = None
        self._prev = prev

    # -- graph bookkeeping ---------------------------------------------------

    def _accum(self, g: np.ndarray) -> None:
        g = _unbroadcast(np.asarray(g, dtype=float), self.data.shape)
        self.grad = g if self.grad is None else self.grad + g

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar output")
        topo, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward()
        # The _backward closures make every op node part of a reference
        # cycle (out -> closure -> out), so spent graphs pile up until the
        # cycle collector runs.  Sever the cycles now: leaves keep their
        # grads for the optimizer; interior nodes are done.
        for node in topo:
            if node._backward is not None:
                node._backward = None
                node._prev = ()
                node.grad = None

    # -- helpers ---------------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @staticmethod
    def _lift(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other):
        other = self._lift(other)
        out = Tensor(self.data + other.data, (self, other))

        def _bw():
            self._accum(out.grad)
            other._accum(out.grad)
        out._backward = _bw
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, (self,))

        def _bw():
            self._accum(-out.grad)
        out._backward = _bw
        return out

    def __sub__(self, other):
        other = self._lift(other)
        out = Tensor(self.data - other.data, (self, other))

        def _bw():
            self._accum(out.grad)
            other._accum(-out.grad)
        out._backward = _bw
        return out

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        out = Tensor(self.data * other.data, (self, other))

        def _bw():
            self._accum(out.grad * other.data)
            other._accum(out.grad * self.data)
        out._backward = _bw
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        out = Tensor(self.data / other.data, (self, other))

        def _bw():
            self._accum(out.grad / other.data)
            other._accum(-out.grad * self.data / (other.data * other.data))
        out._backward = _bw
        return out

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, k: float):
        out = Tensor(self.data ** k, (self,))

        def _bw():
            self._accum(out.grad * k * self.data ** (k - 1))
        out._backward = _bw
        return out

    def matmul(self, other: "Tensor") -> "Tensor":
        other = self._lift(other)
        out = Tensor(self.data @ other.data, (self, other))

        def _bw():
            self._accum(out.grad @ other.data.T)
            other._accum(self.data.T @ out.grad)
        out._backward = _bw
        return out

    __matmul__ = matmul

    # -- nonlinearities ----------------------------------------------------------

    def tanh(self):
        y = np.tanh(self.data)
        out = Tensor(y, (self,))

        def _bw():
            self._accum(out.grad * (1.0 - y * y))
        out._backward = _bw
        return out

    def sigmoid(self):
        y = 1.0 / (1.0 + np.exp(-self.data))
        out = Tensor(y, (self,))

        def _bw():
            self._accum(out.grad * y * (1.0 - y))
        out._backward = _bw
        return out

    def exp(self):
        y = np.exp(self.data)
        out = Tensor(y, (self,))

        def _bw():
            self._accum(out.grad * y)
        out._backward = _bw
        return out

    def log(self):
        out = Tensor(np.log(self.data), (self,))

        def _bw():
            self._accum(out.grad / self.data)
        out._backward = _bw
        return out

    # -- piecewise ops (subgradient: ties route to the first argument) -----------

    def minimum(self, other):
        other = self._lift(other)
        take_self = self.data <= other.data
        out = Tensor(np.where(take_self, self.data, other.data), (self, other))

        def _bw():
            self._accum(out.grad * take_self)
            other._accum(out.grad * ~take_self)
        out._backward = _bw
        return out

    def maximum(self, other):
        other = self._lift(other)
        take_self = self.data >= other.data
        out = Tensor(np.where(take_self, self.data, other.data), (self, other))

        def _bw():
            self._accum(out.grad * take_self)
            other._accum(out.grad * ~take_self)
        out._backward = _bw
        return out

    def clip(self, lo: float, hi: float):
        inside = (self.data >= lo) & (self.data <= hi)
        out = Tensor(np.clip(self.data, lo, hi), (self,))

        def _bw():
            self._accum(out.grad * inside)
        out._backward = _bw
        return out

    # -- reductions ----------------------------------------------------------------

    def sum(self, axis=None):
        out = Tensor(self.data.sum(axis=axis), (self,))

        def _bw():
            g = out.grad
            if axis is not None:
                g = np.expand_dims(g, axis)
            self._accum(np.broadcast_to(g, self.data.shape))
        out._backward = _bw
        return out

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

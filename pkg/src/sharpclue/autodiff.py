"""Minimal reverse-mode autodiff over NumPy arrays.

Just enough machinery for a small convolutional model and its L1-style
losses: a `Tensor` wraps an ndarray, ops record a backward closure, and
`Tensor.backward()` walks the graph in reverse topological order. Ops
whose inputs all have `requires_grad=False` build no graph, so running a
frozen model through the same code path is effectively gradient-free.
`detach()` is the stop-gradient primitive: its output shares data but
severs the graph, so no gradient ever reaches the producing branch.
"""

from __future__ import annotations

import numpy as np

from . import kernels


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of NumPy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bwd")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._bwd = None

    # -- graph plumbing ----------------------------------------------------

    @staticmethod
    def _result(data, parents, bwd) -> "Tensor":
        live = [p for p in parents if p.requires_grad]
        out = Tensor(data, requires_grad=bool(live))
        if live:
            out._parents = tuple(parents)
            out._bwd = bwd
        return out

    def _accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += _unbroadcast(grad, self.data.shape)

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack = [(self, False)]
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
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._bwd is not None:
                node._bwd(node.grad)

    def detach(self) -> "Tensor":
        """Stop-gradient: same values, no graph."""
        return Tensor(self.data, requires_grad=False)

    def item(self) -> float:
        return float(self.data)

    @property
    def shape(self):
        return self.data.shape

    # -- arithmetic --------------------------------------------------------

    @staticmethod
    def _coerce(other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(np.asarray(other))

    def __add__(self, other):
        other = self._coerce(other)
        out_data = self.data + other.data

        def bwd(g):
            self._accumulate(g)
            other._accumulate(g)

        return self._result(out_data, (self, other), bwd)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        out_data = self.data - other.data

        def bwd(g):
            self._accumulate(g)
            other._accumulate(-g)

        return self._result(out_data, (self, other), bwd)

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        other = self._coerce(other)
        out_data = self.data * other.data

        def bwd(g):
            self._accumulate(g * other.data)
            other._accumulate(g * self.data)

        return self._result(out_data, (self, other), bwd)

    __rmul__ = __mul__

    def __neg__(self):
        def bwd(g):
            self._accumulate(-g)

        return self._result(-self.data, (self,), bwd)

    def abs(self) -> "Tensor":
        out_data = np.abs(self.data)
        sign = np.sign(self.data)

        def bwd(g):
            self._accumulate(g * sign)

        return self._result(out_data, (self,), bwd)

    def sum(self) -> "Tensor":
        def bwd(g):
            self._accumulate(np.broadcast_to(g, self.data.shape).copy())

        return self._result(self.data.sum(), (self,), bwd)

    def mean(self) -> "Tensor":
        n = self.data.size

        def bwd(g):
            self._accumulate(np.broadcast_to(g / n, self.data.shape).copy())

        return self._result(self.data.mean(), (self,), bwd)

    def leaky_relu(self, alpha: float = 0.1) -> "Tensor":
        gate = np.where(self.data > 0, 1.0, alpha)

        def bwd(g):
            self._accumulate(g * gate)

        return self._result(np.where(self.data > 0, self.data, alpha * self.data),
                            (self,), bwd)

    def avg_pool2(self) -> "Tensor":
        """2x2 average pooling, stride 2; spatial dims must be even."""
        c, h, w = self.data.shape
        if h % 2 or w % 2:
            raise ValueError(f"avg_pool2 needs even spatial dims, got {(h, w)}")
        pooled = self.data.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4))

        def bwd(g):
            up = np.repeat(np.repeat(g, 2, axis=1), 2, axis=2) / 4.0
            self._accumulate(up)

        return self._result(pooled, (self,), bwd)

    def conv2d(self, weight: "Tensor", bias: "Tensor") -> "Tensor":
        """Same-size conv of a (Cin,H,W) tensor; routes through the kernels."""
        x_data = self.data
        out_data = kernels.conv2d_forward(x_data, weight.data, bias.data)

        def bwd(g):
            g = np.ascontiguousarray(g)
            if self.requires_grad:
                self._accumulate(
                    kernels.conv2d_backward_input(g, weight.data, x_data.shape))
            if weight.requires_grad or bias.requires_grad:
                dw, db = kernels.conv2d_backward_weights(x_data, g, weight.data.shape)
                weight._accumulate(dw)
                bias._accumulate(db)

        return self._result(out_data, (self, weight, bias), bwd)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, a, b in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(a, b)
            t._accumulate(g[tuple(idx)])

    return Tensor._result(out_data, tuple(tensors), bwd)

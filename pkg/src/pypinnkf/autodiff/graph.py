"""
    Reverse-mode graph over numpy arrays.

    A `Node` holds a float64 array value, the nodes it was computed from and a closure that pushes
    its gradient back to them. Values are arrays (one row per collocation point), so one graph
    covers a whole point batch. Broadcasting follows numpy; gradients are summed back to the
    parent's shape.

    Supported primitives: +, -, *, /, unary -, @, square, tanh, softplus, sigmoid, sum, mean,
    reshape, indexing, plus `custom` nodes whose vector-Jacobian products are supplied by the caller.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from pypinnkf.core.structures import GraphConstructionError, sigmoid, softplus

_SCALARS = (int, float, np.integer, np.floating)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def as_node(value) -> "Node":
    """Wrap constants; reject anything that is not a node, a real scalar or a real array."""
    if isinstance(value, Node):
        return value
    if isinstance(value, _SCALARS) and not isinstance(value, bool):
        return Node(np.asarray(value, dtype=np.float64), requires_grad=False)
    if isinstance(value, np.ndarray) and np.issubdtype(value.dtype, np.number) and not np.iscomplexobj(value):
        return Node(value.astype(np.float64, copy=False), requires_grad=False)
    raise GraphConstructionError(f"Unsupported operand of type {type(value).__name__}")


class Node:
    __slots__ = ("value", "grad", "parents", "_backward", "requires_grad", "name")

    def __init__(self, value, parents: Sequence["Node"] = (), backward: Callable[[], None] | None = None,
                 requires_grad: bool = True, name: str = ""):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.parents = tuple(parents)
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)
        self.name = name

    def __repr__(self):
        label = f" '{self.name}'" if self.name else ""
        return f"Node{label}(shape={self.value.shape})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    # ---- graph plumbing ----
    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        g = _unbroadcast(np.asarray(g, dtype=np.float64), self.value.shape)
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def _child(self, value, parents: Sequence["Node"], backward_fn: Callable[["Node"], None]) -> "Node":
        out = Node(value, parents, requires_grad=False)
        if out.requires_grad:
            out._backward = lambda: backward_fn(out)
        return out

    # ---- arithmetic ----
    def __add__(self, other):
        other = as_node(other)
        def bw(out):
            self._accumulate(out.grad)
            other._accumulate(out.grad)
        return self._child(self.value + other.value, (self, other), bw)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_node(other)
        def bw(out):
            self._accumulate(out.grad)
            other._accumulate(-out.grad)
        return self._child(self.value - other.value, (self, other), bw)

    def __rsub__(self, other):
        return as_node(other) - self

    def __mul__(self, other):
        other = as_node(other)
        def bw(out):
            self._accumulate(out.grad * other.value)
            other._accumulate(out.grad * self.value)
        return self._child(self.value * other.value, (self, other), bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_node(other)
        def bw(out):
            self._accumulate(out.grad / other.value)
            other._accumulate(-out.grad * self.value / (other.value * other.value))
        return self._child(self.value / other.value, (self, other), bw)

    def __rtruediv__(self, other):
        return as_node(other) / self

    def __neg__(self):
        def bw(out):
            self._accumulate(-out.grad)
        return self._child(-self.value, (self,), bw)

    def __matmul__(self, other):
        other = as_node(other)
        if self.value.ndim != 2 or other.value.ndim != 2:
            raise GraphConstructionError(f"matmul needs 2-D operands, got {self.shape} @ {other.shape}")
        def bw(out):
            self._accumulate(out.grad @ other.value.T)
            other._accumulate(self.value.T @ out.grad)
        return self._child(self.value @ other.value, (self, other), bw)

    def __rmatmul__(self, other):
        return as_node(other) @ self

    def __pow__(self, exponent):
        if exponent == 2:
            return self.square()
        raise GraphConstructionError(f"Only square powers are supported, got exponent {exponent}")

    def __bool__(self):
        raise GraphConstructionError("Nodes have no truth value; compare their .value instead")

    # ---- elementwise functions ----
    def square(self):
        def bw(out):
            self._accumulate(2.0 * self.value * out.grad)
        return self._child(self.value * self.value, (self,), bw)

    def tanh(self):
        value = np.tanh(self.value)
        def bw(out):
            self._accumulate((1.0 - value * value) * out.grad)
        return self._child(value, (self,), bw)

    def softplus(self):
        value = softplus(self.value)
        def bw(out):
            self._accumulate(sigmoid(self.value) * out.grad)
        return self._child(value, (self,), bw)

    def sigmoid(self):
        value = sigmoid(self.value)
        def bw(out):
            self._accumulate(value * (1.0 - value) * out.grad)
        return self._child(value, (self,), bw)

    # ---- reductions and shape ----
    def sum(self, axis: int | None = None):
        def bw(out):
            g = out.grad if axis is None else np.expand_dims(out.grad, axis)
            self._accumulate(np.broadcast_to(g, self.value.shape))
        return self._child(self.value.sum(axis=axis), (self,), bw)

    def mean(self, axis: int | None = None):
        n = self.value.size if axis is None else self.value.shape[axis]
        if n == 0:
            raise GraphConstructionError("mean of an empty node")
        return self.sum(axis) * (1.0 / n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        def bw(out):
            self._accumulate(out.grad.reshape(self.value.shape))
        return self._child(self.value.reshape(shape), (self,), bw)

    def __getitem__(self, idx):
        def bw(out):
            g = np.zeros_like(self.value)
            if _is_basic_index(idx):
                g[idx] += out.grad
            else:
                np.add.at(g, idx, out.grad)
            self._accumulate(g)
        return self._child(self.value[idx], (self,), bw)

    # ---- reverse pass ----
    def backward(self) -> None:
        """Populate `.grad` on every node this scalar depends on; grads from earlier passes are cleared."""
        if self.value.size != 1:
            raise GraphConstructionError(f"backward() needs a scalar root, got shape {self.shape}")
        order = topological_order(self)
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward()


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (slice, int, np.integer)) or i is None or i is Ellipsis for i in items)


def topological_order(root: Node) -> list[Node]:
    """Parents before children. Raises GraphConstructionError on a cycle."""
    order: list[Node] = []
    state: dict[int, int] = {}      # 1 = on the current path, 2 = done
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        key = id(node)
        if expanded:
            state[key] = 2
            order.append(node)
            continue
        mark = state.get(key)
        if mark == 2:
            continue
        if mark == 1:
            raise GraphConstructionError(f"Cycle detected at {node!r}")
        state[key] = 1
        stack.append((node, True))
        for parent in node.parents:
            if not parent.requires_grad:
                continue
            pmark = state.get(id(parent))
            if pmark == 1:
                raise GraphConstructionError(f"Cycle detected at {parent!r}")
            if pmark is None:
                stack.append((parent, False))
    return order


def custom(value, inputs: Sequence[Node], vjps: Sequence[Callable[[np.ndarray], np.ndarray]], name: str = "") -> Node:
    """
    Node computed outside the primitive set. `vjps[i]` maps the output gradient to the gradient
    of `inputs[i]`; `None` marks an input the value does not depend on differentiably.
    """
    if len(inputs) != len(vjps):
        raise GraphConstructionError("custom node needs one vector-Jacobian product per input")
    inputs = tuple(as_node(i) for i in inputs)
    out = Node(value, inputs, requires_grad=False, name=name)
    if out.requires_grad:
        def bw():
            for node, vjp in zip(inputs, vjps):
                if vjp is not None and node.requires_grad:
                    node._accumulate(vjp(out.grad))
        out._backward = bw
    return out


def constant(value, name: str = "") -> Node:
    return Node(value, requires_grad=False, name=name)


def leaf(value, name: str = "") -> Node:
    return Node(np.array(value, dtype=np.float64, copy=True), requires_grad=True, name=name)

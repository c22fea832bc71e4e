"""Tape-based reverse-mode differentiation.

A :class:`Graph` is an append-only list of :class:`Node` objects. Every op in
:mod:`proxyreg.numerics.ops` that receives at least one ``Node`` appends its
result to the graph of that node; ops applied to plain arrays evaluate eagerly
and never touch a graph. Parents always precede children, so a single reverse
sweep over the tape is a valid topological order.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from ..errors import ContractError, NumericalError

VJP = Callable[[np.ndarray], tuple]


def as_tensor(x) -> np.ndarray:
    """Coerce to a float64 array (Tensors are plain float64 ndarrays)."""
    return np.asarray(x, dtype=np.float64)


def check_finite(value: np.ndarray, what: str = "result") -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NumericalError(f"non-finite values in {what}")
    return value


class Node:
    __slots__ = ("graph", "index", "value", "parents", "vjp", "name", "requires_grad", "kind")

    def __init__(self, graph, index, value, parents, vjp, kind, name=None, requires_grad=False):
        self.graph = graph
        self.index = index
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.kind = kind
        self.name = name
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<Node#{self.index} {self.kind}{label} shape={self.value.shape}>"

    # operator sugar; the implementations live in ops
    def __add__(self, other):
        from .ops import add
        return add(self, other)

    def __radd__(self, other):
        from .ops import add
        return add(other, self)

    def __sub__(self, other):
        from .ops import sub
        return sub(self, other)

    def __rsub__(self, other):
        from .ops import sub
        return sub(other, self)

    def __mul__(self, other):
        from .ops import mul
        return mul(self, other)

    def __rmul__(self, other):
        from .ops import mul
        return mul(other, self)

    def __neg__(self):
        from .ops import scale
        return scale(self, -1.0)

    def __matmul__(self, other):
        from .ops import matmul
        return matmul(self, other)

    def __rmatmul__(self, other):
        from .ops import matmul
        return matmul(other, self)

    def __getitem__(self, index):
        from .ops import getitem
        return getitem(self, index)


class Graph:
    """Single-writer tape. Build one per training step and discard it."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.params: dict[str, Node] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def _append(self, value, parents, vjp, kind, name=None, requires_grad=False) -> Node:
        node = Node(self, len(self.nodes), value, parents, vjp, kind, name, requires_grad)
        self.nodes.append(node)
        return node

    def param(self, name: str, value) -> Node:
        """Register a trainable leaf."""
        if name in self.params:
            raise ContractError(f"parameter {name!r} registered twice")
        value = check_finite(as_tensor(value).copy(), f"parameter {name!r}")
        node = self._append(value, (), None, "param", name=name, requires_grad=True)
        self.params[name] = node
        return node

    def constant(self, value) -> Node:
        return self._append(as_tensor(value), (), None, "const")

    def bind(self, params: Mapping[str, np.ndarray]) -> dict[str, Node]:
        """Register every entry of ``params`` as a trainable leaf."""
        return {name: self.param(name, value) for name, value in params.items()}

    def record(self, value, parents, vjp, kind) -> Node:
        node_parents = tuple(p for p in parents if isinstance(p, Node))
        requires_grad = any(p.requires_grad for p in node_parents)
        return self._append(value, tuple(parents), vjp, kind, requires_grad=requires_grad)


def backward(graph: Graph, loss: Node) -> dict[str, np.ndarray]:
    """Gradient of a scalar ``loss`` with respect to every parameter of ``graph``.

    Parameters the loss does not depend on receive zero gradients.
    """
    if not isinstance(loss, Node) or loss.graph is not graph:
        raise ContractError("loss must be a node of the given graph")
    if loss.value.shape != ():
        raise ContractError(f"loss must be a scalar, got shape {loss.value.shape}")

    grads: list = [None] * (loss.index + 1)
    grads[loss.index] = np.ones((), dtype=np.float64)
    for node in reversed(graph.nodes[: loss.index + 1]):
        g = grads[node.index]
        if g is None or node.vjp is None or not node.requires_grad:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if pg is None or not isinstance(parent, Node) or not parent.requires_grad:
                continue
            if grads[parent.index] is None:
                grads[parent.index] = pg
            else:
                grads[parent.index] = grads[parent.index] + pg

    out = {}
    for name, node in graph.params.items():
        g = grads[node.index] if node.index < len(grads) else None
        out[name] = np.zeros_like(node.value) if g is None else np.asarray(g, dtype=np.float64).reshape(node.value.shape)
    return out

"""A small reverse-mode autodiff tape over numpy arrays.

Nodes are vector/matrix-level primitives (matmul, elementwise maps,
reductions).  Parameters are registered in declaration order and
:meth:`Tape.backward` returns their gradients concatenated into one flat
float64 vector, which is the form gradient surgery works with.

    tape = Tape()
    w = tape.param(np.array([3.0]))
    y = (w * w).sum()
    tape.backward(y)          # array([6.])
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import NonScalarOutput


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# op name -> (forward(inputs, attrs), vjp(g, inputs, out, attrs) -> grads per input)
_OPS: dict[str, tuple[Callable, Callable]] = {
    "add": (
        lambda v, a: v[0] + v[1],
        lambda g, v, o, a: (_unbroadcast(g, v[0].shape), _unbroadcast(g, v[1].shape)),
    ),
    "sub": (
        lambda v, a: v[0] - v[1],
        lambda g, v, o, a: (_unbroadcast(g, v[0].shape), _unbroadcast(-g, v[1].shape)),
    ),
    "mul": (
        lambda v, a: v[0] * v[1],
        lambda g, v, o, a: (_unbroadcast(g * v[1], v[0].shape), _unbroadcast(g * v[0], v[1].shape)),
    ),
    "neg": (lambda v, a: -v[0], lambda g, v, o, a: (-g,)),
    "scale": (lambda v, a: a["k"] * v[0], lambda g, v, o, a: (a["k"] * g,)),
    "matmul": (
        lambda v, a: v[0] @ v[1],
        lambda g, v, o, a: (
            _unbroadcast(g @ np.swapaxes(v[1], -1, -2), v[0].shape) if v[1].ndim > 1 else np.multiply.outer(g, v[1]),
            _unbroadcast(np.swapaxes(v[0], -1, -2) @ g, v[1].shape) if v[0].ndim > 1 else np.multiply.outer(v[0], g),
        ),
    ),
    "silu": (
        lambda v, a: v[0] * _sigmoid(v[0]),
        lambda g, v, o, a: (g * (_sigmoid(v[0]) * (1.0 + v[0] * (1.0 - _sigmoid(v[0])))),),
    ),
    "tanh": (lambda v, a: np.tanh(v[0]), lambda g, v, o, a: (g * (1.0 - o * o),)),
    "exp": (lambda v, a: np.exp(v[0]), lambda g, v, o, a: (g * o,)),
    "square": (lambda v, a: v[0] * v[0], lambda g, v, o, a: (2.0 * g * v[0],)),
    "sum": (lambda v, a: np.asarray(v[0].sum()), lambda g, v, o, a: (np.full(v[0].shape, g),)),
    "mean": (
        lambda v, a: np.asarray(v[0].mean()),
        lambda g, v, o, a: (np.full(v[0].shape, g / max(v[0].size, 1)),),
    ),
}


@dataclass
class Node:
    op: str  # "param", "const" or a key of _OPS
    inputs: tuple[int, ...]
    value: np.ndarray
    attrs: dict[str, Any] = field(default_factory=dict)


class Var:
    """Handle to a node on a tape; supports the usual arithmetic operators."""

    __slots__ = ("tape", "idx")

    def __init__(self, tape: "Tape", idx: int):
        self.tape = tape
        self.idx = idx

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.idx].value

    @property
    def shape(self):
        return self.value.shape

    def _lift(self, other) -> "Var":
        return other if isinstance(other, Var) else self.tape.const(other)

    def __add__(self, o):
        return self.tape.apply("add", self, self._lift(o))

    def __radd__(self, o):
        return self.tape.apply("add", self._lift(o), self)

    def __sub__(self, o):
        return self.tape.apply("sub", self, self._lift(o))

    def __rsub__(self, o):
        return self.tape.apply("sub", self._lift(o), self)

    def __mul__(self, o):
        if isinstance(o, (int, float)):
            return self.tape.apply("scale", self, k=float(o))
        return self.tape.apply("mul", self, self._lift(o))

    def __rmul__(self, o):
        return self.__mul__(o)

    def __neg__(self):
        return self.tape.apply("neg", self)

    def __matmul__(self, o):
        return self.tape.apply("matmul", self, self._lift(o))

    def __rmatmul__(self, o):
        return self.tape.apply("matmul", self._lift(o), self)

    def silu(self):
        return self.tape.apply("silu", self)

    def tanh(self):
        return self.tape.apply("tanh", self)

    def exp(self):
        return self.tape.apply("exp", self)

    def square(self):
        return self.tape.apply("square", self)

    def sum(self):
        return self.tape.apply("sum", self)

    def mean(self):
        return self.tape.apply("mean", self)


class Tape:
    """Single-writer recording of a computation; read-only after recording."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.params: list[int] = []

    def _push(self, node: Node) -> Var:
        self.nodes.append(node)
        return Var(self, len(self.nodes) - 1)

    def param(self, value) -> Var:
        v = self._push(Node("param", (), np.array(value, dtype=float)))
        self.params.append(v.idx)
        return v

    def const(self, value) -> Var:
        return self._push(Node("const", (), np.asarray(value, dtype=float)))

    def apply(self, op: str, *inputs: Var, **attrs) -> Var:
        fwd, _ = _OPS[op]
        ids = tuple(x.idx for x in inputs)
        value = fwd([self.nodes[i].value for i in ids], attrs)
        return self._push(Node(op, ids, np.asarray(value, dtype=float), attrs))

    @property
    def n_params(self) -> int:
        return sum(self.nodes[i].value.size for i in self.params)

    def backward(self, output: Var | int) -> np.ndarray:
        """Gradient of a scalar node w.r.t. every parameter, flattened in
        registration order."""
        out = output.idx if isinstance(output, Var) else int(output)
        if self.nodes[out].value.size != 1:
            raise NonScalarOutput(f"node {out} has shape {self.nodes[out].value.shape}")
        adj: list[np.ndarray | None] = [None] * (out + 1)
        adj[out] = np.ones_like(self.nodes[out].value)
        for i in range(out, -1, -1):
            g = adj[i]
            node = self.nodes[i]
            if g is None or not node.inputs:
                continue
            _, vjp = _OPS[node.op]
            vals = [self.nodes[j].value for j in node.inputs]
            for j, gj in zip(node.inputs, vjp(g, vals, node.value, node.attrs)):
                adj[j] = gj if adj[j] is None else adj[j] + gj
        parts = []
        for p in self.params:
            shape = self.nodes[p].value.shape
            g = adj[p] if p <= out and adj[p] is not None else np.zeros(shape)
            parts.append(np.reshape(g, -1))
        return np.concatenate(parts) if parts else np.zeros(0)

    def replay(self, param_values: list[np.ndarray] | None = None) -> list[np.ndarray]:
        """Re-evaluate the recorded graph, optionally with new parameter
        values (in registration order); returns every node's value."""
        values: list[np.ndarray] = []
        new = dict(zip(self.params, param_values)) if param_values is not None else {}
        for i, node in enumerate(self.nodes):
            if node.op in ("param", "const"):
                values.append(np.asarray(new.get(i, node.value), dtype=float))
            else:
                fwd, _ = _OPS[node.op]
                values.append(np.asarray(fwd([values[j] for j in node.inputs], node.attrs), dtype=float))
        return values


def backward_gradient(tape: Tape, output_node) -> np.ndarray:
    return tape.backward(output_node)

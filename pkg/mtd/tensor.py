"""
tensor.py
---------
Dense float64 matrices with a reverse-mode differentiation tape.

Every value is a 2-D C-contiguous ``float64`` array (a *matrix*). A
``Tape`` records each operation in execution order; ``Tape.backward``
replays the adjoint rules in reverse. Leaves accumulate gradients across
backward calls until ``zero_grad``; intermediate nodes are reset at the
start of every backward pass.

There is no global tape: each operation infers the tape from its operands,
so independent tapes can be used from separate threads.
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .constants import LOG_FLOOR, NORMALIZE_EPS, SIGMOID_CLAMP
from .errors import ContractError, DimensionError, NumericError

logger = logging.getLogger(__name__)

Matrix = np.ndarray
Adjoint = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

ELEMENTWISE_KINDS = ("add", "sub", "mul", "div")
ACTIVATION_KINDS = ("sigmoid", "relu")
REDUCTION_KINDS = ("sum", "mean", "sum_rows", "sum_cols")


def as_matrix(values, name: str = "matrix") -> Matrix:
    """Coerce to a finite 2-D float64 matrix (scalars become 1x1, vectors 1xk)."""
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} holds non-finite values")
    return np.ascontiguousarray(arr)


class ValueNode:
    """One value on a tape together with its gradient and producing operation."""

    __slots__ = ("value", "grad", "parents", "tape", "op", "_adjoint")

    def __init__(self, tape: "Tape", value: Matrix, parents: Tuple["ValueNode", ...] = (),
                 adjoint: Optional[Adjoint] = None, op: str = "leaf"):
        self.tape = tape
        self.value = value
        self.grad = np.zeros_like(value)
        self.parents = parents
        self.op = op
        self._adjoint = adjoint

    @property
    def shape(self) -> Tuple[int, int]:
        return self.value.shape

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def item(self) -> float:
        if self.value.shape != (1, 1):
            raise ContractError(f"item() needs a 1x1 node, got {self.value.shape}")
        return float(self.value[0, 0])

    def __repr__(self) -> str:
        return f"ValueNode(op={self.op}, shape={self.shape})"


class Tape:
    """Ordered record of operations; nodes are appended in execution order."""

    def __init__(self):
        self.nodes: List[ValueNode] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def leaf(self, values, name: str = "leaf") -> ValueNode:
        node = ValueNode(self, as_matrix(values, name), op=name)
        self.nodes.append(node)
        return node

    def constant(self, values, name: str = "constant") -> ValueNode:
        """A leaf whose gradient the caller does not intend to read."""
        return self.leaf(values, name)

    def record(self, value: np.ndarray, parents: Tuple[ValueNode, ...], adjoint: Adjoint,
               op: str) -> ValueNode:
        for p in parents:
            if p.tape is not self:
                raise ContractError(f"{op}: operands belong to different tapes")
        value = np.ascontiguousarray(value, dtype=np.float64)
        if not np.all(np.isfinite(value)):
            raise NumericError(f"{op} produced non-finite values")
        node = ValueNode(self, value, parents, adjoint, op)
        self.nodes.append(node)
        return node

    def zero_grad(self) -> None:
        for node in self.nodes:
            node.grad.fill(0.0)

    def backward(self, root: ValueNode) -> None:
        """Populate gradients of everything ``root`` depends on."""
        if root.tape is not self:
            raise ContractError("backward root belongs to a different tape")
        if root.value.shape != (1, 1):
            raise ContractError(f"backward needs a 1x1 scalar root, got shape {root.value.shape}")
        for node in self.nodes:
            if not node.is_leaf:
                node.grad.fill(0.0)
        root.grad += 1.0
        stop = self.nodes.index(root)
        for node in reversed(self.nodes[:stop + 1]):
            if node.is_leaf or not node.grad.any():
                continue
            for parent, g in zip(node.parents, node._adjoint(node.grad)):
                if g is not None:
                    parent.grad += g


def backward(root: ValueNode) -> None:
    root.tape.backward(root)


# ---------------------------------------------------------
# Broadcasting helpers (row vector or scalar on the right)
# ---------------------------------------------------------

def _check_broadcast(op: str, a: ValueNode, b: ValueNode) -> None:
    ar, ac = a.shape
    br, bc = b.shape
    if (br, bc) == (ar, ac) or (br, bc) == (1, 1) or (br == 1 and bc == ac):
        return
    raise DimensionError(f"{op}: cannot combine shapes {a.shape} and {b.shape}")


def _unbroadcast(g: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape == (1, 1):
        return np.array([[g.sum()]])
    return g.sum(axis=0, keepdims=True)


# ---------------------------------------------------------
# Operations
# ---------------------------------------------------------

def matmul(a: ValueNode, b: ValueNode) -> ValueNode:
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    av, bv = a.value, b.value

    def adjoint(g):
        return g @ bv.T, av.T @ g

    return a.tape.record(av @ bv, (a, b), adjoint, "matmul")


def elementwise(a: ValueNode, b: ValueNode, kind: str) -> ValueNode:
    if kind not in ELEMENTWISE_KINDS:
        raise ContractError(f"unknown elementwise kind '{kind}'")
    _check_broadcast(kind, a, b)
    av, bv = a.value, b.value
    a_shape, b_shape = a.shape, b.shape

    if kind == "add":
        out = av + bv

        def adjoint(g):
            return g, _unbroadcast(g, b_shape)
    elif kind == "sub":
        out = av - bv

        def adjoint(g):
            return g, _unbroadcast(-g, b_shape)
    elif kind == "mul":
        out = av * bv

        def adjoint(g):
            return _unbroadcast(g * bv, a_shape), _unbroadcast(g * av, b_shape)
    else:
        if np.any(bv == 0.0):
            raise NumericError(f"div: divisor of shape {b_shape} contains zeros")
        out = av / bv

        def adjoint(g):
            return g / bv, _unbroadcast(-g * av / (bv * bv), b_shape)

    return a.tape.record(out, (a, b), adjoint, kind)


def add(a: ValueNode, b: ValueNode) -> ValueNode:
    return elementwise(a, b, "add")


def sub(a: ValueNode, b: ValueNode) -> ValueNode:
    return elementwise(a, b, "sub")


def mul(a: ValueNode, b: ValueNode) -> ValueNode:
    return elementwise(a, b, "mul")


def div(a: ValueNode, b: ValueNode) -> ValueNode:
    return elementwise(a, b, "div")


def scale(a: ValueNode, factor: float) -> ValueNode:
    return elementwise(a, a.tape.constant([[float(factor)]]), "mul")


def square(a: ValueNode) -> ValueNode:
    return elementwise(a, a, "mul")


def activation(a: ValueNode, kind: str) -> ValueNode:
    if kind == "sigmoid":
        x = np.clip(a.value, -SIGMOID_CLAMP, SIGMOID_CLAMP)
        out = 1.0 / (1.0 + np.exp(-x))

        def adjoint(g):
            return (g * out * (1.0 - out),)
    elif kind == "relu":
        active = a.value > 0.0
        out = np.where(active, a.value, 0.0)

        def adjoint(g):
            return (g * active,)
    else:
        raise ContractError(f"unknown activation kind '{kind}'")
    return a.tape.record(out, (a,), adjoint, kind)


def sigmoid(a: ValueNode) -> ValueNode:
    return activation(a, "sigmoid")


def relu(a: ValueNode) -> ValueNode:
    return activation(a, "relu")


def reductions(a: ValueNode, kind: str) -> ValueNode:
    """sum/mean -> 1x1; sum_rows -> rows x 1 (each row summed); sum_cols -> 1 x cols."""
    rows, cols = a.shape
    if kind == "sum":
        out = np.array([[a.value.sum()]])

        def adjoint(g):
            return (np.full((rows, cols), g[0, 0]),)
    elif kind == "mean":
        count = rows * cols
        out = np.array([[a.value.sum() / count]])

        def adjoint(g):
            return (np.full((rows, cols), g[0, 0] / count),)
    elif kind == "sum_rows":
        out = a.value.sum(axis=1, keepdims=True)

        def adjoint(g):
            return (np.broadcast_to(g, (rows, cols)).copy(),)
    elif kind == "sum_cols":
        out = a.value.sum(axis=0, keepdims=True)

        def adjoint(g):
            return (np.broadcast_to(g, (rows, cols)).copy(),)
    else:
        raise ContractError(f"unknown reduction kind '{kind}'")
    return a.tape.record(out, (a,), adjoint, kind)


def total(a: ValueNode) -> ValueNode:
    return reductions(a, "sum")


def mean(a: ValueNode) -> ValueNode:
    return reductions(a, "mean")


def sum_rows(a: ValueNode) -> ValueNode:
    return reductions(a, "sum_rows")


def sum_cols(a: ValueNode) -> ValueNode:
    return reductions(a, "sum_cols")


def row_l2_normalize(a: ValueNode, eps: float = NORMALIZE_EPS) -> ValueNode:
    """Divide each row by max(||row||, eps)."""
    norms = np.sqrt((a.value * a.value).sum(axis=1, keepdims=True))
    guarded = norms <= eps
    denom = np.where(guarded, eps, norms)
    out = a.value / denom

    def adjoint(g):
        proj = (g * out).sum(axis=1, keepdims=True)
        dx = np.where(guarded, g, g - out * proj) / denom
        return (dx,)

    return a.tape.record(out, (a,), adjoint, "row_l2_normalize")


def log(a: ValueNode, floor: float = LOG_FLOOR) -> ValueNode:
    """Natural log of max(a, floor); no gradient below the floor."""
    above = a.value > floor
    safe = np.where(above, a.value, floor)
    out = np.log(safe)

    def adjoint(g):
        return (np.where(above, g / safe, 0.0),)

    return a.tape.record(out, (a,), adjoint, "log")


def clamp_min(a: ValueNode, floor: float) -> ValueNode:
    above = a.value > floor
    out = np.where(above, a.value, floor)

    def adjoint(g):
        return (g * above,)

    return a.tape.record(out, (a,), adjoint, "clamp_min")


def concat_cols(nodes: Sequence[ValueNode]) -> ValueNode:
    if not nodes:
        raise ContractError("concat_cols needs at least one node")
    rows = nodes[0].shape[0]
    for n in nodes:
        if n.shape[0] != rows:
            raise DimensionError(f"concat_cols: row counts differ ({n.shape[0]} vs {rows})")
    widths = [n.shape[1] for n in nodes]
    edges = np.cumsum([0] + widths)
    out = np.concatenate([n.value for n in nodes], axis=1)

    def adjoint(g):
        return [g[:, edges[i]:edges[i + 1]] for i in range(len(nodes))]

    return nodes[0].tape.record(out, tuple(nodes), adjoint, "concat_cols")

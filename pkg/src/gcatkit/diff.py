"""Minimal reverse-mode differentiation over dense real matrices.

The engine is eager: every primitive computes its value immediately and
keeps the graph alive for ``backward``. Values and gradients are float64
2-D arrays throughout (scalars are 1x1), which keeps finite-difference
tolerances achievable even though checkpoints persist 32-bit.

The primitive set is closed: matrix multiply, row/column concatenation,
elementwise add/subtract/multiply, LeakyReLU/ReLU, softmax over caller
specified index groups, L1 norm with the sign(0)=0 subgradient, width-3
valid convolution over an (n, 3) stack, dot product, mean over an axis,
and elementwise log/exp. Everything the models need is composed from
these (see the derived helpers at the bottom).

A computation graph must stay on one thread from construction through
``backward``; distinct graphs are independent.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import _kernels as K
from .errors import ContractError, RetryableKinkError, ShapeError

Array = np.ndarray
Expression = Callable[[dict[str, "Node"]], "Node"]

DEFAULT_LEAKY_SLOPE = 0.2  # shared by every activation in the package


class Node:
    """One value in a computation graph."""

    __slots__ = ("value", "op", "parents", "grad", "requires_grad", "_vjp", "kink_margin", "name")

    def __init__(self, value, op, parents=(), vjp=None, requires_grad=None, name=None):
        self.value: Array = value
        self.op: str = op
        self.parents: tuple[Node, ...] = tuple(parents)
        self.grad: Array | None = None
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in self.parents)
        self.requires_grad: bool = requires_grad
        self._vjp = vjp
        self.kink_margin: float | None = None
        self.name: str | None = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Node({self.op}, shape={self.value.shape})"


def _as_matrix(value) -> Array:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"values must be at most 2-D, got ndim={arr.ndim}")
    return arr


def leaf(name: str, value, requires_grad: bool = True) -> Node:
    return Node(_as_matrix(value), "leaf", (), requires_grad=requires_grad, name=name)


def constant(value) -> Node:
    return Node(_as_matrix(value), "const", (), requires_grad=False)


def _check_same_shape(op: str, a: Node, b: Node) -> None:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"{op}: shapes {a.value.shape} and {b.value.shape} differ")


def matmul(a: Node, b: Node) -> Node:
    if a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(f"matmul: inner dims {a.value.shape} x {b.value.shape}")
    out = a.value @ b.value

    def vjp(g):
        da = g @ b.value.T if a.requires_grad else None
        db = a.value.T @ g if b.requires_grad else None
        return da, db

    return Node(out, "matmul", (a, b), vjp)


def add(a: Node, b: Node) -> Node:
    _check_same_shape("add", a, b)
    return Node(a.value + b.value, "add", (a, b), lambda g: (g, g))


def sub(a: Node, b: Node) -> Node:
    _check_same_shape("sub", a, b)
    return Node(a.value - b.value, "sub", (a, b), lambda g: (g, -g))


def mul(a: Node, b: Node) -> Node:
    _check_same_shape("mul", a, b)

    def vjp(g):
        return g * b.value, g * a.value

    return Node(a.value * b.value, "mul", (a, b), vjp)


def concat_rows(nodes: Sequence[Node]) -> Node:
    nodes = tuple(nodes)
    cols = {n.value.shape[1] for n in nodes}
    if len(cols) != 1:
        raise ShapeError(f"concat_rows: column counts differ: {sorted(cols)}")
    counts = [n.value.shape[0] for n in nodes]
    splits = np.cumsum(counts)[:-1]

    def vjp(g):
        return tuple(np.vsplit(g, splits))

    return Node(np.vstack([n.value for n in nodes]), "concat_rows", nodes, vjp)


def concat_cols(nodes: Sequence[Node]) -> Node:
    nodes = tuple(nodes)
    rows = {n.value.shape[0] for n in nodes}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols: row counts differ: {sorted(rows)}")
    counts = [n.value.shape[1] for n in nodes]
    splits = np.cumsum(counts)[:-1]

    def vjp(g):
        return tuple(np.hsplit(g, splits))

    return Node(np.hstack([n.value for n in nodes]), "concat_cols", nodes, vjp)


def leaky_relu(x: Node, slope: float = DEFAULT_LEAKY_SLOPE) -> Node:
    out = Node(
        K.leaky_relu(x.value, slope),
        "leaky_relu",
        (x,),
        lambda g: (K.leaky_relu_grad(x.value, g, slope),),
    )
    out.kink_margin = float(np.abs(x.value).min()) if x.value.size else np.inf
    return out


def relu(x: Node) -> Node:
    """Elementwise max with zero; subgradient at 0 is 0."""
    out = Node(
        np.maximum(x.value, 0.0),
        "relu",
        (x,),
        lambda g: (np.where(x.value > 0.0, g, 0.0),),
    )
    out.kink_margin = float(np.abs(x.value).min()) if x.value.size else np.inf
    return out


def grouped_softmax(x: Node, groups: Sequence[np.ndarray]) -> Node:
    """Softmax applied independently within each index group of a column.

    ``groups`` must partition the rows of ``x`` (an (n, 1) column). Each
    group's outputs are positive and sum to 1.
    """
    if x.value.shape[1] != 1:
        raise ShapeError(f"grouped_softmax: expected a column, got {x.value.shape}")
    n = x.value.shape[0]
    order = np.concatenate([np.asarray(g, dtype=np.int64) for g in groups]) if groups else np.empty(0, np.int64)
    if order.size != n or not np.array_equal(np.sort(order), np.arange(n)):
        raise ContractError("grouped_softmax: groups must partition the rows exactly once")
    lengths = np.array([len(g) for g in groups], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)])

    probs_ordered = K.segment_softmax(x.value[order, 0], offsets)
    out = np.empty((n, 1))
    out[order, 0] = probs_ordered

    def vjp(g):
        dz_ordered = K.segment_softmax_grad(probs_ordered, g[order, 0], offsets)
        dx = np.empty((n, 1))
        dx[order, 0] = dz_ordered
        return (dx,)

    return Node(out, "grouped_softmax", (x,), vjp)


def l1_norm(x: Node) -> Node:
    """Sum of absolute values, as a scalar node; subgradient of |.| at 0 is 0."""
    out = Node(
        np.array([[K.abs_sum(x.value)]]),
        "l1_norm",
        (x,),
        lambda g: (g[0, 0] * K.sign_zero(x.value),),
    )
    out.kink_margin = float(np.abs(x.value).min()) if x.value.size else np.inf
    return out


def conv1x3(stack: Node, filters: Node) -> Node:
    """Valid convolution of width-3 filters over an (n, 3) stack -> (n, m) maps."""
    if stack.value.shape[1] != 3:
        raise ShapeError(f"conv1x3: stack must have 3 columns, got {stack.value.shape}")
    if filters.value.shape[1] != 3:
        raise ShapeError(f"conv1x3: filters must have 3 columns, got {filters.value.shape}")

    def vjp(g):
        dstack = g @ filters.value if stack.requires_grad else None
        dfilters = g.T @ stack.value if filters.requires_grad else None
        return dstack, dfilters

    return Node(K.conv3(stack.value, filters.value), "conv1x3", (stack, filters), vjp)


def dot(a: Node, b: Node) -> Node:
    _check_same_shape("dot", a, b)

    def vjp(g):
        return g[0, 0] * b.value, g[0, 0] * a.value

    return Node(np.array([[float(np.vdot(a.value, b.value))]]), "dot", (a, b), vjp)


def mean_over_axis(x: Node, axis: int) -> Node:
    if axis not in (0, 1):
        raise ShapeError(f"mean_over_axis: axis must be 0 or 1, got {axis}")
    n = x.value.shape[axis]
    out = x.value.mean(axis=axis, keepdims=True)

    def vjp(g):
        return (np.broadcast_to(g / n, x.value.shape).copy(),)

    return Node(out, "mean_over_axis", (x,), vjp)


def log(x: Node) -> Node:
    return Node(np.log(x.value), "log", (x,), lambda g: (g / x.value,))


def exp(x: Node) -> Node:
    out_val = np.exp(x.value)
    return Node(out_val, "exp", (x,), lambda g: (g * out_val,))


def _topo_order(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def backward(root: Node) -> dict[str, Array]:
    """Populate ``grad`` on every reachable node; return named-leaf gradients.

    ``root`` must be a 1x1 scalar.
    """
    if root.value.shape != (1, 1):
        raise ContractError(f"backward: root must be scalar, got shape {root.value.shape}")
    order = _topo_order(root)
    for node in order:
        node.grad = None
    root.grad = np.ones((1, 1))
    leaf_grads: dict[str, Array] = {}
    for node in reversed(order):
        if node.grad is None or not node.requires_grad:
            continue
        if node.name is not None and not node.parents:
            leaf_grads[node.name] = node.grad
        if node._vjp is None:
            continue
        parent_grads = node._vjp(node.grad)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            if parent.grad is None:
                parent.grad = pg.copy()
            else:
                parent.grad += pg
    return leaf_grads


def forward(expression: Expression, inputs: Mapping[str, Array]) -> Node:
    """Evaluate an expression on named leaf matrices; returns the root node."""
    leaves = {name: leaf(name, value) for name, value in inputs.items()}
    return expression(leaves)


def _min_kink_margin(root: Node) -> float:
    margin = np.inf
    seen: set[int] = set()
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if node.kink_margin is not None:
            margin = min(margin, node.kink_margin)
        stack.extend(node.parents)
    return margin


def grad_check(expression: Expression, inputs: Mapping[str, Array], epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Raises RetryableKinkError when any kinked primitive (ReLU, LeakyReLU,
    L1) evaluates within ``epsilon`` of its kink at the base point, since
    finite differences are meaningless there; callers should resample.
    """
    mats = {name: _as_matrix(v) for name, v in inputs.items()}
    root = forward(expression, mats)
    if root.value.shape != (1, 1):
        raise ContractError("grad_check: expression must produce a scalar")
    if _min_kink_margin(root) < epsilon:
        raise RetryableKinkError("input lies within epsilon of a kink; resample and retry")
    analytic = backward(root)

    worst = 0.0
    for name, base in mats.items():
        grad = analytic.get(name)
        if grad is None:
            grad = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            bumped = {k: v.copy() for k, v in mats.items()}
            bumped[name][idx] += epsilon
            f_plus = forward(expression, bumped).value[0, 0]
            bumped[name][idx] -= 2 * epsilon
            f_minus = forward(expression, bumped).value[0, 0]
            numeric = (f_plus - f_minus) / (2 * epsilon)
            a = grad[idx]
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# Derived helpers (compositions of catalog primitives, no new gradients)
# ---------------------------------------------------------------------------


def negate(x: Node) -> Node:
    return sub(constant(np.zeros(x.value.shape)), x)


def absval(x: Node) -> Node:
    """|x| elementwise as relu(x) + relu(-x); shares the sign(0)=0 subgradient."""
    return add(relu(x), relu(negate(x)))


def take_rows(x: Node, ids: Iterable[int]) -> Node:
    """Gather rows by index, as a one-hot selector matmul."""
    ids = np.asarray(list(ids), dtype=np.int64)
    sel = np.zeros((len(ids), x.value.shape[0]))
    sel[np.arange(len(ids)), ids] = 1.0
    return matmul(constant(sel), x)


def sum_all(x: Node) -> Node:
    return dot(x, constant(np.ones(x.value.shape)))


def row_sums(x: Node) -> Node:
    return matmul(x, constant(np.ones((x.value.shape[1], 1))))


def scale(x: Node, factor: float) -> Node:
    return mul(x, constant(np.full(x.value.shape, factor)))


def softplus(x: Node) -> Node:
    """log(1 + exp(x)) elementwise, in the overflow-safe max-plus form.

    softplus(x) = relu(x) + log(1 + exp(x - 2 relu(x))); the exp argument
    is -|x| <= 0, so it never overflows.
    """
    m = relu(x)
    inner = exp(sub(x, scale(m, 2.0)))
    return add(m, log(add(constant(np.ones(x.value.shape)), inner)))

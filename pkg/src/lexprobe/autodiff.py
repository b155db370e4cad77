"""Reverse-mode automatic differentiation over dense float64 arrays.

The graph is built define-by-run: every operation allocates a fresh Node
holding the forward value, references to its parents, and a closure that
maps the output adjoint to parent adjoints. ``backward`` walks the graph
once per call and adds the pass-local adjoints into each node's ``grad``,
so repeated calls accumulate (two backward passes double every gradient).

Only the operations needed by the span classifier and the two trainable
encoders are provided; there is no broadcasting beyond scalar scaling and
no GPU path. Values are float64 throughout to leave headroom for the
finite-difference checks.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, DimensionError, LabelError

Array = np.ndarray

# Floor for probabilities entering a logarithm; keeps losses finite on
# saturated softmax outputs without visibly perturbing healthy ones.
_PROB_FLOOR = 1e-300


class Node:
    """One vertex of the computation graph.

    ``value`` and ``grad`` are float64 arrays of identical shape; ``grad``
    starts at zero and only ``backward`` writes to it. Leaf nodes have no
    parents. ``requires_grad`` is inherited by results from their operands,
    so constants never cause gradient work.
    """

    __slots__ = ("value", "grad", "parents", "backward_rule", "requires_grad")

    def __init__(
        self,
        value: Array,
        parents: tuple["Node", ...] = (),
        backward_rule: Callable[[Array], Sequence[tuple["Node", Array]]] | None = None,
        requires_grad: bool = False,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.parents = parents
        self.backward_rule = backward_rule
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Node(shape={self.value.shape}, requires_grad={self.requires_grad})"


class Parameter:
    """A named leaf Node that an optimizer may update."""

    __slots__ = ("name", "node")

    def __init__(self, name: str, value: Array):
        self.name = name
        self.node = Node(np.array(value, dtype=np.float64), requires_grad=True)

    @property
    def value(self) -> Array:
        return self.node.value

    @property
    def grad(self) -> Array:
        return self.node.grad

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.node.value.shape})"


def constant(value: Array | float) -> Node:
    """Wrap an array or scalar as a non-trainable leaf."""
    return Node(np.asarray(value, dtype=np.float64))


def _result(value: Array, parents: tuple[Node, ...], rule) -> Node:
    requires = any(p.requires_grad for p in parents)
    return Node(value, parents, rule if requires else None, requires_grad=requires)


# ---------------------------------------------------------------------------
# operations


def matmul(a: Node, b: Node) -> Node:
    """Matrix product; 1-D operands are treated as a row (a) or column (b)."""
    av, bv = a.value, b.value
    if av.ndim not in (1, 2) or bv.ndim not in (1, 2):
        raise DimensionError(f"matmul expects 1-D or 2-D operands, got {av.shape} and {bv.shape}")
    a2 = av[None, :] if av.ndim == 1 else av
    b2 = bv[:, None] if bv.ndim == 1 else bv
    if a2.shape[1] != b2.shape[0]:
        raise DimensionError(f"matmul inner dimensions disagree: {av.shape} vs {bv.shape}")
    out2 = a2 @ b2

    out = out2
    if av.ndim == 1:
        out = out[0]
    if bv.ndim == 1:
        out = out[..., 0]

    def rule(g: Array):
        g2 = g.reshape(out2.shape)
        da = g2 @ b2.T
        db = a2.T @ g2
        return ((a, da.reshape(av.shape)), (b, db.reshape(bv.shape)))

    return _result(out, (a, b), rule)


def add(a: Node, b: Node) -> Node:
    """Elementwise sum of two same-shape nodes."""
    if a.value.shape != b.value.shape:
        raise DimensionError(f"add shapes disagree: {a.value.shape} vs {b.value.shape}")
    return _result(a.value + b.value, (a, b), lambda g: ((a, g), (b, g)))


def mul(a: Node, b: Node) -> Node:
    """Elementwise (Hadamard) product of two same-shape nodes."""
    if a.value.shape != b.value.shape:
        raise DimensionError(f"mul shapes disagree: {a.value.shape} vs {b.value.shape}")
    return _result(a.value * b.value, (a, b), lambda g: ((a, g * b.value), (b, g * a.value)))


def scale(x: Node, s: Node | float) -> Node:
    """Multiply a node by a scalar (python float or scalar Node)."""
    if isinstance(s, Node):
        if s.value.ndim != 0:
            raise DimensionError(f"scale factor must be a scalar node, got shape {s.value.shape}")
        out = x.value * s.value

        def rule(g: Array):
            return ((x, g * s.value), (s, np.asarray(np.sum(g * x.value))))

        return _result(out, (x, s), rule)
    factor = float(s)
    return _result(x.value * factor, (x,), lambda g: ((x, g * factor),))


def tanh(x: Node) -> Node:
    y = np.tanh(x.value)
    return _result(y, (x,), lambda g: ((x, g * (1.0 - y * y)),))


def sigmoid(x: Node) -> Node:
    # Split by sign so exp never overflows.
    v = x.value
    y = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))), np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
    return _result(y, (x,), lambda g: ((x, g * y * (1.0 - y)),))


def relu(x: Node) -> Node:
    mask = x.value > 0
    return _result(np.where(mask, x.value, 0.0), (x,), lambda g: ((x, g * mask),))


def concat(parts: Iterable[Node]) -> Node:
    """Concatenate 1-D nodes into one longer vector."""
    parts = list(parts)
    if not parts:
        raise DimensionError("concat of zero vectors")
    for p in parts:
        if p.value.ndim != 1:
            raise DimensionError(f"concat expects 1-D nodes, got shape {p.value.shape}")
    out = np.concatenate([p.value for p in parts])
    offsets = np.cumsum([0] + [p.value.shape[0] for p in parts])

    def rule(g: Array):
        return tuple((p, g[offsets[i]:offsets[i + 1]]) for i, p in enumerate(parts))

    return _result(out, tuple(parts), rule)


def stack(rows: Iterable[Node]) -> Node:
    """Stack equal-length 1-D nodes into an (n, d) matrix (concat on a new axis)."""
    rows = list(rows)
    if not rows:
        raise DimensionError("stack of zero vectors")
    d = rows[0].value.shape
    for r in rows:
        if r.value.ndim != 1 or r.value.shape != d:
            raise DimensionError(f"stack expects equal 1-D shapes, got {d} and {r.value.shape}")
    out = np.stack([r.value for r in rows])

    def rule(g: Array):
        return tuple((r, g[i]) for i, r in enumerate(rows))

    return _result(out, tuple(rows), rule)


def softmax(x: Node) -> Node:
    """Softmax over a 1-D node, computed with max-subtraction."""
    if x.value.ndim != 1 or x.value.shape[0] == 0:
        raise DimensionError(f"softmax expects a non-empty vector, got shape {x.value.shape}")
    shifted = x.value - np.max(x.value)
    e = np.exp(shifted)
    y = e / np.sum(e)

    def rule(g: Array):
        return ((x, y * (g - np.dot(g, y))),)

    return _result(y, (x,), rule)


def cross_entropy(probs: Node, gold: int) -> Node:
    """Negative log probability of the gold index under an already-normalized distribution."""
    if probs.value.ndim != 1:
        raise DimensionError(f"cross_entropy expects a probability vector, got shape {probs.value.shape}")
    k = probs.value.shape[0]
    if not 0 <= gold < k:
        raise LabelError(f"gold index {gold} outside [0, {k})")
    p = max(float(probs.value[gold]), _PROB_FLOOR)
    out = np.asarray(-math.log(p))

    def rule(g: Array):
        dp = np.zeros(k)
        dp[gold] = -float(g) / p
        return ((probs, dp),)

    return _result(out, (probs,), rule)


def dropout(x: Node, p: float, rng: np.random.Generator, train: bool) -> Node:
    """Inverted dropout: scales kept units by 1/(1-p) at train time, identity otherwise."""
    if not train or p <= 0.0:
        return x
    if not 0.0 <= p < 1.0:
        raise ContractError(f"dropout probability must be in [0, 1), got {p}")
    mask = (rng.random(x.value.shape) >= p) / (1.0 - p)
    return mul(x, constant(mask))


# ---------------------------------------------------------------------------
# backward pass


def backward(loss: Node) -> None:
    """Accumulate d(loss)/d(node) into ``grad`` for every reachable node that requires it."""
    if loss.value.shape != ():
        raise ContractError(f"backward needs a scalar loss, got shape {loss.value.shape}")

    # Iterative topological sort over the requires_grad subgraph.
    order: list[Node] = []
    seen: set[int] = set()
    stack_: list[tuple[Node, bool]] = [(loss, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in seen:
                stack_.append((parent, False))

    # Pass-local adjoints, added into .grad at the end of each node's visit
    # so that repeated backward calls accumulate rather than compound.
    adjoint: dict[int, Array] = {id(loss): np.ones_like(loss.value)}
    for node in reversed(order):
        g = adjoint.pop(id(node), None)
        if g is None:
            continue
        node.grad = node.grad + g
        if node.backward_rule is None:
            continue
        for parent, pg in node.backward_rule(g):
            if not parent.requires_grad:
                continue
            key = id(parent)
            if key in adjoint:
                adjoint[key] = adjoint[key] + pg
            else:
                adjoint[key] = np.array(pg, dtype=np.float64, copy=True)


def zero_grads(params: Iterable[Parameter]) -> None:
    for p in params:
        p.node.grad = np.zeros_like(p.node.value)


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    """Adam with bias correction; grads are zeroed after each step."""

    def __init__(self, lr: float = 1e-3, betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self._m: dict[int, Array] = {}
        self._v: dict[int, Array] = {}

    def step(self, params: Sequence[Parameter]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p in params:
            key = id(p)
            g = p.node.grad
            m = self._m.get(key)
            v = self._v.get(key)
            if m is None:
                m = np.zeros_like(g)
                v = np.zeros_like(g)
            m = b1 * m + (1.0 - b1) * g
            v = b2 * v + (1.0 - b2) * g * g
            self._m[key] = m
            self._v[key] = v
            m_hat = m / (1.0 - b1**self.t)
            v_hat = v / (1.0 - b2**self.t)
            p.node.value = p.node.value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            p.node.grad = np.zeros_like(p.node.value)


# ---------------------------------------------------------------------------
# finite-difference checking


def gradient_error(
    f: Callable[[], Node],
    params: Sequence[Parameter],
    step: float = 1e-3,
    coords: dict[str, Sequence[int]] | None = None,
) -> float:
    """Compare analytic gradients of ``f`` against central finite differences.

    ``f`` rebuilds the graph from the current parameter values and returns a
    scalar loss node. Returns the worst relative error over the checked
    coordinates; ``coords`` optionally restricts which flat indices of each
    named parameter are probed (default: all of them).
    """
    zero_grads(params)
    loss = f()
    backward(loss)
    analytic = {p.name: p.node.grad.copy() for p in params}

    worst = 0.0
    for p in params:
        flat = p.node.value.reshape(-1)
        idx = coords.get(p.name, range(flat.size)) if coords is not None else range(flat.size)
        for i in idx:
            original = flat[i]
            flat[i] = original + step
            hi = float(f().value)
            flat[i] = original - step
            lo = float(f().value)
            flat[i] = original
            fd = (hi - lo) / (2.0 * step)
            a = float(analytic[p.name].reshape(-1)[i])
            err = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
            worst = max(worst, err)
    zero_grads(params)
    return worst


def directional_gradient_error(
    f: Callable[[], Node],
    params: Sequence[Parameter],
    rng: np.random.Generator,
    step: float = 1e-3,
) -> float:
    """Central finite difference along one random direction spanning all parameters.

    Checks the full gradient in two function evaluations: the directional
    derivative predicted by the analytic gradients must match
    (f(theta + h*r) - f(theta - h*r)) / 2h for a random unit direction r.
    """
    zero_grads(params)
    loss = f()
    backward(loss)
    direction = [rng.standard_normal(p.node.value.shape) for p in params]
    norm = math.sqrt(sum(float(np.sum(d * d)) for d in direction))
    direction = [d / norm for d in direction]
    analytic = sum(float(np.sum(p.node.grad * d)) for p, d in zip(params, direction))

    originals = [p.node.value.copy() for p in params]
    for p, d in zip(params, direction):
        p.node.value = p.node.value + step * d
    hi = float(f().value)
    for p, orig, d in zip(params, originals, direction):
        p.node.value = orig - step * d
    lo = float(f().value)
    for p, orig in zip(params, originals):
        p.node.value = orig
    zero_grads(params)

    fd = (hi - lo) / (2.0 * step)
    return abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-8)

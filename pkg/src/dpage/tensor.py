"""Minimal dense-tensor engine with reverse-mode automatic differentiation.

Values are float64 numpy arrays. Every operation that participates in a
graph records its parents and a backward closure; ``backward`` walks the
graph in reverse topological order and accumulates gradients additively.
Decoding-time code wraps itself in ``no_grad()`` so no graph is built.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, DimensionError, DomainError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph construction inside the block (forward values only)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "parents", "op", "requires_grad", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), op="leaf",
                 backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data) if requires_grad and op == "leaf" else None
        self.parents = parents
        self.op = op
        self.requires_grad = requires_grad
        self._backward = backward_fn

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.data.shape})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def backward(self):
        backward(self)

    # operator sugar for the common binary ops
    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)


def parameter(data, name=None) -> Tensor:
    """A trainable leaf tensor with a zero-initialized gradient buffer."""
    t = Tensor(np.array(data, dtype=np.float64), requires_grad=True)
    return t


def constant(data) -> Tensor:
    return Tensor(data)


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _make(data, parents, op, backward_fn) -> Tensor:
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=tuple(parents), op=op,
                      backward_fn=backward_fn)
    return Tensor(data, op=op)


def backward(loss: Tensor):
    """Accumulate d(loss)/d(node) into .grad of every trainable ancestor.

    Gradients add onto whatever is already in the buffers; callers zero
    them (sgd_step does) between steps.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    # Interior buffers are scratch space for this pass; only leaf (parameter)
    # gradients accumulate across backward calls.
    for node in topo:
        if node.parents:
            node.grad = None
    _accumulate(loss, np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# core operations

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul shapes incompatible: {a.data.shape} x {b.data.shape}")
    out = a.data @ b.data

    def bw(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _make(out, (a, b), "matmul", bw)


def linear(x: Tensor, w: Tensor) -> Tensor:
    """x @ w.T for weight matrices stored as (out_dim, in_dim)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[1]:
        raise DimensionError(f"linear shapes incompatible: {x.data.shape} x {w.data.shape}^T")
    out = x.data @ w.data.T

    def bw(g):
        _accumulate(x, g @ w.data)
        _accumulate(w, g.T @ x.data)

    return _make(out, (x, w), "linear", bw)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = a.data + b.data

    def bw(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _make(out, (a, b), "add", bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = a.data * b.data

    def bw(g):
        _accumulate(a, g * b.data)
        _accumulate(b, g * a.data)

    return _make(out, (a, b), "mul", bw)


def neg(x: Tensor) -> Tensor:
    def bw(g):
        _accumulate(x, -g)

    return _make(-x.data, (x,), "neg", bw)


def scale(x: Tensor, c: float) -> Tensor:
    def bw(g):
        _accumulate(x, g * c)

    return _make(x.data * c, (x,), "scale", bw)


def sigmoid(x: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-x.data))

    def bw(g):
        _accumulate(x, g * out * (1.0 - out))

    return _make(out, (x,), "sigmoid", bw)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def bw(g):
        _accumulate(x, g * (1.0 - out * out))

    return _make(out, (x,), "tanh", bw)


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0.0):
        raise DomainError("log requires strictly positive inputs")
    out = np.log(x.data)

    def bw(g):
        _accumulate(x, g / x.data)

    return _make(out, (x,), "log", bw)


def concat(a: Tensor, b: Tensor, axis: int = 0) -> Tensor:
    sa, sb = list(a.data.shape), list(b.data.shape)
    if a.data.size and b.data.size:
        if len(sa) != len(sb):
            raise DimensionError(f"concat rank mismatch: {a.data.shape} vs {b.data.shape}")
        for d in range(len(sa)):
            if d != (axis % len(sa)) and sa[d] != sb[d]:
                raise DimensionError(
                    f"concat non-axis dims differ: {a.data.shape} vs {b.data.shape} on axis {axis}")
    if a.data.size == 0:
        return _make(b.data.copy(), (b,), "concat", lambda g: _accumulate(b, g))
    if b.data.size == 0:
        return _make(a.data.copy(), (a,), "concat", lambda g: _accumulate(a, g))
    out = np.concatenate([a.data, b.data], axis=axis)
    seam = a.data.shape[axis % a.data.ndim]

    def bw(g):
        ga, gb = np.split(g, [seam], axis=axis)
        _accumulate(a, ga)
        _accumulate(b, gb)

    return _make(out, (a, b), "concat", bw)


def split(x: Tensor, sizes: Sequence[int], axis: int = 0) -> tuple[Tensor, ...]:
    if sum(sizes) != x.data.shape[axis % x.data.ndim]:
        raise DimensionError(f"split sizes {list(sizes)} do not cover axis {axis} of {x.data.shape}")
    offsets = np.cumsum(sizes)[:-1]
    pieces = np.split(x.data, offsets, axis=axis)
    outs = []
    start = 0
    for piece, size in zip(pieces, sizes):
        lo = start
        start += size

        def bw(g, lo=lo, size=size):
            full = np.zeros_like(x.data)
            sl = [slice(None)] * x.data.ndim
            sl[axis % x.data.ndim] = slice(lo, lo + size)
            full[tuple(sl)] = g
            _accumulate(x, full)

        outs.append(_make(piece.copy(), (x,), "split", bw))
    return tuple(outs)


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax over the last axis, max-subtracted for stability."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        _accumulate(x, out * (g - dot))

    return _make(out, (x,), "softmax", bw)


def log_softmax(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse
    sm = np.exp(out)

    def bw(g):
        _accumulate(x, g - sm * g.sum(axis=-1, keepdims=True))

    return _make(out, (x,), "log_softmax", bw)


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = x.data.sum(axis=axis, keepdims=keepdims)
    if axis is None and not keepdims:
        out = np.asarray([out])  # scalars carry shape (1,)

    def bw(g):
        if axis is None:
            _accumulate(x, np.full(x.data.shape, float(g.reshape(-1)[0])))
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            _accumulate(x, np.broadcast_to(gg, x.data.shape).copy())

    return _make(out, (x,), "sum", bw)


def scale_rows(x: Tensor, s: Tensor) -> Tensor:
    """Multiply each row of x by the matching entry of column vector s."""
    if s.data.shape != (x.data.shape[0], 1):
        raise DimensionError(f"scale_rows needs s of shape ({x.data.shape[0]}, 1), got {s.data.shape}")
    out = x.data * s.data

    def bw(g):
        _accumulate(x, g * s.data)
        _accumulate(s, (g * x.data).sum(axis=1, keepdims=True))

    return _make(out, (x, s), "scale_rows", bw)


def rows(x: Tensor, indices) -> Tensor:
    """Gather rows of a 2-D tensor; backward scatter-adds into the source."""
    idx = np.asarray(indices, dtype=np.intp)
    out = x.data[idx]

    def bw(g):
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        np.add.at(x.grad, idx, g)

    if _grad_enabled and x.requires_grad:
        return Tensor(out, requires_grad=True, parents=(x,), op="rows", backward_fn=bw)
    return Tensor(out, op="rows")


def repeat_rows(x: Tensor, k: int) -> Tensor:
    """Repeat each row k times in place: row i becomes rows i*k..i*k+k-1."""
    n, m = x.data.shape
    out = np.repeat(x.data, k, axis=0)

    def bw(g):
        _accumulate(x, g.reshape(n, k, m).sum(axis=1))

    return _make(out, (x,), "repeat_rows", bw)


def pick(x: Tensor, indices) -> Tensor:
    """Select one column entry per row: out[i, 0] = x[i, indices[i]]."""
    idx = np.asarray(indices, dtype=np.intp)
    r = np.arange(x.data.shape[0])
    out = x.data[r, idx].reshape(-1, 1)

    def bw(g):
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        np.add.at(x.grad, (r, idx), g[:, 0])

    if _grad_enabled and x.requires_grad:
        return Tensor(out, requires_grad=True, parents=(x,), op="pick", backward_fn=bw)
    return Tensor(out, op="pick")


# ---------------------------------------------------------------------------
# optimization

def grad_norm(params: Iterable[Tensor]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    return math.sqrt(total)


def sgd_step(params: Iterable[Tensor], lr: float, clip: float = math.inf):
    """Global-norm clip, apply p -= lr * grad, zero the gradients."""
    if lr <= 0:
        raise ContractError("lr must be positive")
    if clip <= 0:
        raise ContractError("clip must be positive")
    ps = list(params)
    g = grad_norm(ps)
    factor = clip / g if g > clip else 1.0
    for p in ps:
        if p.grad is not None:
            p.data -= lr * factor * p.grad
            p.grad.fill(0.0)


# ---------------------------------------------------------------------------
# gradient checking

@dataclass
class GradCheckReport:
    max_rel_err: float
    tolerance: float
    per_param: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


def grad_check(build_loss: Callable[[], Tensor], params: dict[str, Tensor],
               tolerance: float = 1e-4, step: float = 1e-5) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    build_loss must recompute the scalar loss from the current .data of
    the given parameters every time it is called.
    """
    for p in params.values():
        p.zero_grad()
    loss = build_loss()
    backward(loss)
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in params.items()}
    worst = 0.0
    per_param = {}
    for name, p in params.items():
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        nflat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = build_loss().item()
            flat[i] = orig - step
            lo = build_loss().item()
            flat[i] = orig
            nflat[i] = (hi - lo) / (2.0 * step)
        diff = np.abs(analytic[name] - numeric)
        denom = np.maximum(np.abs(analytic[name]) + np.abs(numeric), 1e-6)
        rel = float((diff / denom).max()) if diff.size else 0.0
        per_param[name] = rel
        worst = max(worst, rel)
        p.zero_grad()
    return GradCheckReport(max_rel_err=worst, tolerance=tolerance, per_param=per_param)

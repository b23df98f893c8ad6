"""Dense float64 tensors with a reverse-mode tape.

A `Tensor` wraps a numpy array plus, when gradients are enabled and any input
is tracked, its tape record: the op tag, references to the input tensors and
a backward closure holding whatever forward values the derivative rule needs.
The recorded graph is acyclic; `backward` walks it in reverse topological
order exactly once and accumulates leaf gradients into `Parameter.grad`
additively. Tapes are per-forward-pass: dropping the output tensors frees the
graph.

Shapes follow numpy row-major layout. Broadcasting is supported only for the
bias pattern (adding a vector along the last axis); everything else requires
exact shape agreement. Set ONLSTM_CHECK_FINITE=1 to assert finiteness after
every public op (the test suite does); cheap targeted checks in log-like ops,
losses and the optimizer guard the default path.
"""

import os
import threading
from contextlib import contextmanager

import numpy as np

from . import kernels as K
from .errors import ContractError, NumericsError, ShapeError

CHECK_FINITE = os.environ.get("ONLSTM_CHECK_FINITE", "0") == "1"


class _GradMode(threading.local):
    # recording is per-thread: evaluation threads flip only their own flag
    enabled = True


_grad_mode = _GradMode()

# test-harness hook: op tag -> scale applied to that op's input gradients
_derivative_faults: dict[str, float] = {}


@contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation mode)."""
    prev = _grad_mode.enabled
    _grad_mode.enabled = False
    try:
        yield
    finally:
        _grad_mode.enabled = prev


def grad_enabled() -> bool:
    return _grad_mode.enabled


def set_derivative_fault(op: str, scale: float | None):
    """Corrupt the backward rule of `op` by `scale` (None clears). Test hook."""
    if scale is None:
        _derivative_faults.pop(op, None)
    else:
        _derivative_faults[op] = float(scale)


class Tensor:
    """n-dimensional float64 array, optionally carrying its tape record."""

    __slots__ = ("data", "op", "parents", "bwd", "track")

    def __init__(self, data, op=None, parents=(), bwd=None, track=False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.op = op
        self.parents = parents
        self.bwd = bwd
        self.track = track

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def values(self) -> np.ndarray:
        """Flat row-major copy of the entries."""
        return self.data.reshape(-1).copy()

    def item(self) -> float:
        return float(self.data)

    def assert_finite(self, context: str = ""):
        if not np.all(np.isfinite(self.data)):
            where = f" in {context}" if context else ""
            raise NumericsError(f"non-finite values{where} (op={self.op})")
        return self

    def __repr__(self):
        tag = f", op={self.op}" if self.op else ""
        return f"Tensor(shape={self.data.shape}{tag})"


class Parameter(Tensor):
    """Trainable leaf tensor with a persistent accumulated gradient."""

    __slots__ = ("grad", "name")

    def __init__(self, value, name: str):
        super().__init__(value, track=True)
        self.grad = np.zeros_like(self.data)
        self.name = name

    def zero_grad(self):
        self.grad.fill(0.0)

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.data.shape})"


def constant(data) -> Tensor:
    """Untracked tensor from user data; rejects non-finite input."""
    t = Tensor(data)
    return t.assert_finite("constant")


def _out(data, op, parents, bwd) -> Tensor:
    if _grad_mode.enabled and any(p.track for p in parents):
        t = Tensor(data, op=op, parents=tuple(parents), bwd=bwd, track=True)
    else:
        t = Tensor(data, op=op)
    if CHECK_FINITE:
        t.assert_finite(op)
    return t


def _fault(op: str, grads: tuple) -> tuple:
    scale = _derivative_faults.get(op)
    if scale is None:
        return grads
    return tuple(None if g is None else g * scale for g in grads)


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; `b` may be a vector broadcast along the last axis."""
    bias = b.ndim == 1 and a.ndim > 1
    if not bias and a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")
    if bias and a.shape[-1] != b.shape[0]:
        raise ShapeError(f"add: bias length {b.shape[0]} vs last axis of {a.shape}")

    def bwd(g):
        gb = g.reshape(-1, b.shape[0]).sum(axis=0) if bias else g
        return _fault("add", (g, gb))

    return _out(a.data + b.data, "add", (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} differ")

    def bwd(g):
        return _fault("sub", (g, -g))

    return _out(a.data - b.data, "sub", (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
    ad, bd = a.data, b.data

    def bwd(g):
        return _fault("mul", (g * bd, g * ad))

    return _out(ad * bd, "mul", (a, b), bwd)


def scale(a: Tensor, k) -> Tensor:
    """Multiply by a constant scalar or constant ndarray (no grad through k)."""
    k = np.asarray(k, dtype=np.float64)

    def bwd(g):
        return _fault("scale", (g * k,))

    return _out(a.data * k, "scale", (a,), bwd)


def neg(a: Tensor) -> Tensor:
    def bwd(g):
        return _fault("neg", (-g,))

    return _out(-a.data, "neg", (a,), bwd)


def one_minus(a: Tensor) -> Tensor:
    def bwd(g):
        return _fault("one_minus", (-g,))

    return _out(1.0 - a.data, "one_minus", (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul: need 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims disagree, {a.shape} x {b.shape}")
    ad, bd = a.data, b.data

    def bwd(g):
        return _fault("matmul", (g @ bd.T, ad.T @ g))

    return _out(ad @ bd, "matmul", (a, b), bwd)


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose: need 2-d, got {a.shape}")

    def bwd(g):
        return _fault("transpose", (g.T,))

    return _out(a.data.T.copy(), "transpose", (a,), bwd)


def concat(parts: list, axis: int = -1) -> Tensor:
    if axis not in (0, -1):
        raise ContractError("concat supports axis 0 or -1 only")
    widths = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + widths)

    def bwd(g):
        if axis == 0:
            gs = tuple(g[offsets[j]:offsets[j + 1]] for j in range(len(parts)))
        else:
            gs = tuple(g[..., offsets[j]:offsets[j + 1]] for j in range(len(parts)))
        return _fault("concat", gs)

    return _out(np.concatenate([p.data for p in parts], axis=axis), "concat", tuple(parts), bwd)


def slice_last(a: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous slice along the last axis."""
    n = a.shape[-1]
    if not (0 <= start < stop <= n):
        raise ContractError(f"slice_last: [{start}:{stop}] outside axis of length {n}")
    shape = a.shape

    def bwd(g):
        full = np.zeros(shape)
        full[..., start:stop] = g
        return _fault("slice", (full,))

    return _out(np.ascontiguousarray(a.data[..., start:stop]), "slice", (a,), bwd)


def rows(a: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of a 2-d tensor (embedding lookup)."""
    if a.ndim != 2:
        raise ShapeError(f"rows: need 2-d table, got {a.shape}")
    ids = np.asarray(ids, dtype=np.int64)
    shape = a.shape

    def bwd(g):
        full = np.zeros(shape)
        np.add.at(full, ids, g)
        return _fault("rows", (full,))

    return _out(a.data[ids], "rows", (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    y = K.sigmoid_fwd(np.ascontiguousarray(a.data))

    def bwd(g):
        return _fault("sigmoid", (K.sigmoid_bwd(y, g),))

    return _out(y, "sigmoid", (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def bwd(g):
        return _fault("tanh", (K.tanh_bwd(y, g),))

    return _out(y, "tanh", (a,), bwd)


def abs_(a: Tensor) -> Tensor:
    sign = np.sign(a.data)

    def bwd(g):
        return _fault("abs", (g * sign,))

    return _out(np.abs(a.data), "abs", (a,), bwd)


def softmax_stable(a: Tensor) -> Tensor:
    """Max-subtracted softmax along the last axis."""
    flat = np.ascontiguousarray(a.data.reshape(-1, a.shape[-1]))
    y = K.softmax_fwd(flat).reshape(a.shape)

    def bwd(g):
        y2 = y.reshape(-1, y.shape[-1])
        g2 = np.ascontiguousarray(g.reshape(y2.shape))
        return _fault("softmax", (K.softmax_bwd(y2, g2).reshape(y.shape),))

    return _out(y, "softmax", (a,), bwd)


def cumsum(a: Tensor) -> Tensor:
    """Left-to-right cumulative sum along the last axis."""

    def bwd(g):
        rev = np.flip(np.cumsum(np.flip(g, axis=-1), axis=-1), axis=-1)
        return _fault("cumsum", (rev,))

    return _out(np.cumsum(a.data, axis=-1), "cumsum", (a,), bwd)


def minimum1(a: Tensor) -> Tensor:
    """Elementwise min with 1.0; grad passes only where the input is <= 1."""
    mask = a.data <= 1.0

    def bwd(g):
        return _fault("minimum1", (g * mask,))

    return _out(np.minimum(a.data, 1.0), "minimum1", (a,), bwd)


def repeat_last(a: Tensor, times: int) -> Tensor:
    """Duplicate each entry `times` times consecutively along the last axis."""
    if times < 1:
        raise ContractError("repeat_last: times must be >= 1")
    in_shape = a.shape

    def bwd(g):
        return _fault("repeat", (g.reshape(*in_shape, times).sum(axis=-1),))

    return _out(np.repeat(a.data, times, axis=-1), "repeat", (a,), bwd)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    if int(np.prod(shape)) != a.size:
        raise ShapeError(f"reshape: {a.shape} has {a.size} entries, target {shape}")
    in_shape = a.shape

    def bwd(g):
        return _fault("reshape", (g.reshape(in_shape),))

    return _out(a.data.reshape(shape), "reshape", (a,), bwd)


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape

    def bwd(g):
        return _fault("sum", (np.broadcast_to(g, shape).copy(),))

    return _out(np.sum(a.data), "sum", (a,), bwd)


def mean_all(a: Tensor) -> Tensor:
    n = a.size
    shape = a.shape

    def bwd(g):
        return _fault("mean", (np.broadcast_to(g / n, shape).copy(),))

    return _out(np.mean(a.data), "mean", (a,), bwd)


def cross_entropy(logits: Tensor, ids: np.ndarray) -> Tensor:
    """Per-row negative log-softmax picked at `ids`; logits [N, V] -> [N]."""
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy: need 2-d logits, got {logits.shape}")
    ids = np.asarray(ids, dtype=np.int64)
    if ids.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: ids shape {ids.shape} vs {logits.shape[0]} rows")
    if ids.min(initial=0) < 0 or ids.max(initial=0) >= logits.shape[1]:
        raise ContractError("cross_entropy: target id outside vocabulary axis")
    ld = np.ascontiguousarray(logits.data)
    nll = K.cross_entropy_fwd(ld, ids)

    def bwd(g):
        return _fault("cross_entropy", (K.cross_entropy_bwd(ld, ids, g),))

    out = _out(nll, "cross_entropy", (logits,), bwd)
    return out.assert_finite("cross_entropy")


def onlstm_combine(f: Tensor, i: Tensor, mf: Tensor, mi: Tensor,
                   chat: Tensor, cprev: Tensor):
    """Fused structured update; returns (c, f_eff, i_eff) with f_eff/i_eff as data."""
    args = (f, i, mf, mi, chat, cprev)
    datas = tuple(np.ascontiguousarray(t.data) for t in args)
    f_eff, i_eff, c = K.onlstm_combine_fwd(*datas)

    def bwd(g):
        return _fault("onlstm_combine", K.onlstm_combine_bwd(*datas, f_eff, i_eff, g))

    return _out(c, "onlstm_combine", args, bwd), f_eff, i_eff


def lstm_combine(f: Tensor, i: Tensor, chat: Tensor, cprev: Tensor) -> Tensor:
    args = (f, i, chat, cprev)
    datas = tuple(np.ascontiguousarray(t.data) for t in args)

    def bwd(g):
        return _fault("lstm_combine", K.lstm_combine_bwd(*datas, g))

    return _out(K.lstm_combine_fwd(*datas), "lstm_combine", args, bwd)


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------


def backward(root: Tensor):
    """Accumulate d(root)/d(param) into every reachable Parameter.grad."""
    if root.ndim != 0:
        raise ContractError(f"backward: root must be scalar, got shape {root.shape}")
    if not root.track:
        raise ContractError("backward: root is not connected to any recorded tape")
    root.assert_finite("backward root")

    # iterative reverse topological order (graphs can be deep for long BPTT)
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.track and id(p) not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(root): np.ones(())}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if isinstance(node, Parameter):
            node.grad += g
            continue
        if node.bwd is None:
            continue
        for parent, pg in zip(node.parents, node.bwd(g)):
            if pg is None or not parent.track:
                continue
            acc = grads.get(id(parent))
            # stored arrays may alias each other (a bwd can hand the same
            # buffer to two parents), so accumulation must not mutate
            grads[id(parent)] = pg if acc is None else acc + pg

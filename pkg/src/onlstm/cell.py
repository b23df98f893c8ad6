"""Recurrent cells: the ordered-neurons step and a baseline LSTM step.

The ordered-neurons cell augments the usual four gates with two master gates
shaped by cumax (cumulative softmax). The master forget gate rises
monotonically 0->1 across the neuron index, the master input gate falls 1->0,
and their overlap delimits the segment where the plain per-neuron gates act.
Master gates live in hidden_size/chunk_factor dimensions and are expanded by
consecutive repetition so each chunk of adjacent neurons shares one value.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .tensor import Parameter, Tensor

GATES = ("f", "i", "o", "c")
MASTER_GATES = ("mf", "mi")


def cumax(logits: Tensor) -> Tensor:
    """Cumulative softmax along the last axis: the CDF of the split point.

    Monotone non-decreasing in [0, 1] with final element 1 (clamped against
    ulp-level cumsum overshoot).
    """
    return T.minimum1(T.cumsum(T.softmax_stable(logits)))


def expand_chunks(master: Tensor, chunk_factor: int) -> Tensor:
    """Repeat each master-gate entry chunk_factor times consecutively."""
    return T.repeat_last(master, chunk_factor)


@dataclass
class CellState:
    h: Tensor
    c: Tensor


@dataclass
class StepTrace:
    """Per-step master-gate record (pre-expansion) used by the parser.

    split_estimate is D_m - sum(master_forget): the expected number of
    low-ranking neurons erased this step.
    """

    master_forget: np.ndarray
    master_input: np.ndarray
    split_estimate: float | np.ndarray


class CellParams:
    """Weights of one recurrent cell.

    Each gate g has input matrix w_g [out, input_size], recurrence matrix
    u_g [out, hidden_size] and bias b_g [out], where out is hidden_size for
    the four plain gates and hidden_size // chunk_factor for the master
    gates (ordered-neurons cells only).
    """

    def __init__(self, kind: str, input_size: int, hidden_size: int,
                 chunk_factor: int, rng: np.random.Generator, prefix: str = "cell"):
        if kind not in ("onlstm", "lstm"):
            raise ConfigError(f"unknown cell kind {kind!r}")
        if kind == "onlstm" and hidden_size % chunk_factor != 0:
            raise ConfigError(
                f"hidden size {hidden_size} not divisible by chunk factor {chunk_factor}")
        self.kind = kind
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.chunk_factor = chunk_factor if kind == "onlstm" else 1
        self.d_m = hidden_size // self.chunk_factor

        bound = 1.0 / np.sqrt(hidden_size)
        gate_out = {g: hidden_size for g in GATES}
        if kind == "onlstm":
            gate_out.update({g: self.d_m for g in MASTER_GATES})
        self._gates = tuple(gate_out)
        for g, out in gate_out.items():
            w = rng.uniform(-bound, bound, size=(out, input_size))
            u = rng.uniform(-bound, bound, size=(out, hidden_size))
            # master-forget bias starts positive: remember by default
            b = np.full(out, 1.0) if g == "mf" else np.zeros(out)
            setattr(self, f"w_{g}", Parameter(w, f"{prefix}.w_{g}"))
            setattr(self, f"u_{g}", Parameter(u, f"{prefix}.u_{g}"))
            setattr(self, f"b_{g}", Parameter(b, f"{prefix}.b_{g}"))

    def parameters(self) -> list[Parameter]:
        out = []
        for g in self._gates:
            out += [getattr(self, f"w_{g}"), getattr(self, f"u_{g}"), getattr(self, f"b_{g}")]
        return out

    def combined(self, u_mask: np.ndarray | None = None):
        """Stacked (input weights^T, recurrent weights^T, bias) for one pass.

        Built once per sequence so the per-step work is two matmuls. u_mask,
        when given, is a constant 0/1-scaled mask applied to the stacked
        recurrent matrix (per-sequence weight dropout).
        """
        wt = T.transpose(T.concat([getattr(self, f"w_{g}") for g in self._gates], axis=0))
        ut = T.transpose(T.concat([getattr(self, f"u_{g}") for g in self._gates], axis=0))
        if u_mask is not None:
            ut = T.scale(ut, u_mask)
        b = T.concat([getattr(self, f"b_{g}") for g in self._gates], axis=-1)
        return wt, ut, b

    def gate_offsets(self) -> dict[str, tuple[int, int]]:
        offs, pos = {}, 0
        for g in self._gates:
            width = self.hidden_size if g in GATES else self.d_m
            offs[g] = (pos, pos + width)
            pos += width
        return offs


def _check_step_shapes(params: CellParams, x: Tensor, prev: CellState):
    if x.shape[-1] != params.input_size:
        raise ShapeError(f"step: input {x.shape} vs input_size {params.input_size}")
    for name, t in (("h", prev.h), ("c", prev.c)):
        if t.shape[-1] != params.hidden_size:
            raise ShapeError(f"step: prev.{name} {t.shape} vs hidden_size {params.hidden_size}")
        if t.ndim != x.ndim or t.shape[:-1] != x.shape[:-1]:
            raise ShapeError(f"step: batch dims of x {x.shape} vs prev.{name} {t.shape}")


def _preactivations(params: CellParams, x: Tensor, prev: CellState, combined):
    wt, ut, b = combined if combined is not None else params.combined()
    return T.add(T.add(T.matmul(x, wt), T.matmul(prev.h, ut)), b)


def _promote(x: Tensor, prev: CellState):
    if x.ndim == 2:
        return x, prev, False
    lift = lambda t: T.reshape(t, (1, t.shape[-1]))
    return lift(x), CellState(lift(prev.h), lift(prev.c)), True


def _squeeze(t: Tensor) -> Tensor:
    return T.reshape(t, (t.shape[-1],))


def onlstm_step(params: CellParams, x: Tensor, prev: CellState,
                combined=None, master_override=None):
    """One ordered-neurons step; returns (CellState, StepTrace).

    `master_override`, when given as a pair of arrays in [0,1] shaped like the
    master gates, replaces the cumax outputs directly. It exists for tests
    that need gate configurations unreachable through the cumax CDF (its
    final element is identically 1, so e.g. an all-write master input gate
    has no generating pre-activation).
    """
    if params.kind != "onlstm":
        raise ConfigError("onlstm_step called with lstm parameters")
    _check_step_shapes(params, x, prev)
    x, prev, squeezed = _promote(x, prev)

    pre = _preactivations(params, x, prev, combined)
    offs = params.gate_offsets()
    f = T.sigmoid(T.slice_last(pre, *offs["f"]))
    i = T.sigmoid(T.slice_last(pre, *offs["i"]))
    o = T.sigmoid(T.slice_last(pre, *offs["o"]))
    chat = T.tanh(T.slice_last(pre, *offs["c"]))

    if master_override is None:
        mf = cumax(T.slice_last(pre, *offs["mf"]))
        mi = T.one_minus(cumax(T.slice_last(pre, *offs["mi"])))
    else:
        mf_arr = np.asarray(master_override[0], dtype=np.float64).reshape(f.shape[0], params.d_m)
        mi_arr = np.asarray(master_override[1], dtype=np.float64).reshape(f.shape[0], params.d_m)
        mf, mi = Tensor(mf_arr), Tensor(mi_arr)

    mf_full = expand_chunks(mf, params.chunk_factor)
    mi_full = expand_chunks(mi, params.chunk_factor)
    c, _, _ = T.onlstm_combine(f, i, mf_full, mi_full, chat, prev.c)
    h = T.mul(o, T.tanh(c))

    trace = StepTrace(
        master_forget=mf.data.copy(),
        master_input=mi.data.copy(),
        split_estimate=params.d_m - mf.data.sum(axis=-1),
    )
    if squeezed:
        h, c = _squeeze(h), _squeeze(c)
        trace.master_forget = trace.master_forget[0]
        trace.master_input = trace.master_input[0]
        trace.split_estimate = float(trace.split_estimate[0])
    return CellState(h, c), trace


def lstm_step(params: CellParams, x: Tensor, prev: CellState, combined=None) -> CellState:
    """One plain LSTM step: c = f*c_prev + i*chat, h = o*tanh(c)."""
    if params.kind != "lstm":
        raise ConfigError("lstm_step called with onlstm parameters")
    _check_step_shapes(params, x, prev)
    x, prev, squeezed = _promote(x, prev)

    pre = _preactivations(params, x, prev, combined)
    offs = params.gate_offsets()
    f = T.sigmoid(T.slice_last(pre, *offs["f"]))
    i = T.sigmoid(T.slice_last(pre, *offs["i"]))
    o = T.sigmoid(T.slice_last(pre, *offs["o"]))
    chat = T.tanh(T.slice_last(pre, *offs["c"]))

    c = T.lstm_combine(f, i, chat, prev.c)
    h = T.mul(o, T.tanh(c))
    if squeezed:
        h, c = _squeeze(h), _squeeze(c)
    return CellState(h, c)


def step(params: CellParams, x: Tensor, prev: CellState, combined=None):
    """Dispatch on cell kind; returns (CellState, StepTrace | None)."""
    if params.kind == "onlstm":
        return onlstm_step(params, x, prev, combined=combined)
    return lstm_step(params, x, prev, combined=combined), None


def zero_state(params: CellParams, batch: int | None = None) -> CellState:
    shape = (params.hidden_size,) if batch is None else (batch, params.hidden_size)
    return CellState(Tensor(np.zeros(shape)), Tensor(np.zeros(shape)))

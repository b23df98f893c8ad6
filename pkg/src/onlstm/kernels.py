"""Hot numeric kernels with numba and pure-numpy implementations.

Every kernel exists twice: a vectorized numpy version (suffix `_np`) and a
numba @njit loop version (suffix `_nb`, compiled lazily on import when the
numba backend is active). The module-level names without suffix point at the
active implementation per `backend.ACTIVE`; `IMPLS` keeps both sets around so
tests and the benchmark can compare them directly.

All kernels take and return C-contiguous float64 arrays. Elementwise kernels
accept any shape (they operate on the raveled view); row kernels
(softmax/cross-entropy) take 2D [rows, n].
"""

import numpy as np

from . import backend

# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def sigmoid_fwd_np(x):
    # exp of -|x| never overflows; piecewise form keeps full accuracy at both tails
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_bwd_np(y, g):
    return g * y * (1.0 - y)


def tanh_bwd_np(y, g):
    return g * (1.0 - y * y)


def softmax_fwd_np(x2d):
    m = x2d.max(axis=1, keepdims=True)
    e = np.exp(x2d - m)
    return e / e.sum(axis=1, keepdims=True)


def softmax_bwd_np(y2d, g2d):
    dot = (y2d * g2d).sum(axis=1, keepdims=True)
    return y2d * (g2d - dot)


def onlstm_combine_fwd_np(f, i, mf, mi, chat, cprev):
    """Structured cell update: returns (f_eff, i_eff, c).

    f_eff = mf*(f*mi + 1 - mi), i_eff = mi*(i*mf + 1 - mf),
    c = f_eff*cprev + i_eff*chat. mf/mi are the chunk-expanded master gates.
    """
    f_eff = mf * (f * mi + 1.0 - mi)
    i_eff = mi * (i * mf + 1.0 - mf)
    c = f_eff * cprev + i_eff * chat
    return f_eff, i_eff, c


def onlstm_combine_bwd_np(f, i, mf, mi, chat, cprev, f_eff, i_eff, gc):
    gfe = gc * cprev
    gie = gc * chat
    gf = gfe * mf * mi
    gi = gie * mi * mf
    gmf = gfe * (f * mi + 1.0 - mi) + gie * mi * (i - 1.0)
    gmi = gfe * mf * (f - 1.0) + gie * (i * mf + 1.0 - mf)
    gchat = gc * i_eff
    gcprev = gc * f_eff
    return gf, gi, gmf, gmi, gchat, gcprev


def lstm_combine_fwd_np(f, i, chat, cprev):
    return f * cprev + i * chat


def lstm_combine_bwd_np(f, i, chat, cprev, gc):
    return gc * cprev, gc * chat, gc * i, gc * f


def cross_entropy_fwd_np(logits2d, ids):
    m = logits2d.max(axis=1)
    lse = m + np.log(np.exp(logits2d - m[:, None]).sum(axis=1))
    picked = logits2d[np.arange(logits2d.shape[0]), ids]
    return lse - picked


def cross_entropy_bwd_np(logits2d, ids, g):
    p = softmax_fwd_np(logits2d)
    p[np.arange(logits2d.shape[0]), ids] -= 1.0
    return p * g[:, None]


_NP_IMPL = {
    "sigmoid_fwd": sigmoid_fwd_np,
    "sigmoid_bwd": sigmoid_bwd_np,
    "tanh_bwd": tanh_bwd_np,
    "softmax_fwd": softmax_fwd_np,
    "softmax_bwd": softmax_bwd_np,
    "onlstm_combine_fwd": onlstm_combine_fwd_np,
    "onlstm_combine_bwd": onlstm_combine_bwd_np,
    "lstm_combine_fwd": lstm_combine_fwd_np,
    "lstm_combine_bwd": lstm_combine_bwd_np,
    "cross_entropy_fwd": cross_entropy_fwd_np,
    "cross_entropy_bwd": cross_entropy_bwd_np,
}

# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

_NB_IMPL = None

if backend.ACTIVE == "numba":
    from numba import njit

    @njit(cache=True)
    def _sigmoid_fwd_flat(x, out):
        for k in range(x.size):
            v = x[k]
            if v >= 0.0:
                out[k] = 1.0 / (1.0 + np.exp(-v))
            else:
                e = np.exp(v)
                out[k] = e / (1.0 + e)

    def sigmoid_fwd_nb(x):
        out = np.empty_like(x)
        _sigmoid_fwd_flat(x.ravel(), out.ravel())
        return out

    @njit(cache=True)
    def _mul_gate_flat(y, g, out):
        for k in range(y.size):
            out[k] = g[k] * y[k] * (1.0 - y[k])

    def sigmoid_bwd_nb(y, g):
        out = np.empty_like(y)
        _mul_gate_flat(y.ravel(), np.ascontiguousarray(g).ravel(), out.ravel())
        return out

    @njit(cache=True)
    def _tanh_bwd_flat(y, g, out):
        for k in range(y.size):
            out[k] = g[k] * (1.0 - y[k] * y[k])

    def tanh_bwd_nb(y, g):
        out = np.empty_like(y)
        _tanh_bwd_flat(y.ravel(), np.ascontiguousarray(g).ravel(), out.ravel())
        return out

    @njit(cache=True)
    def _softmax_fwd_2d(x, out):
        rows, n = x.shape
        for r in range(rows):
            m = x[r, 0]
            for k in range(1, n):
                if x[r, k] > m:
                    m = x[r, k]
            s = 0.0
            for k in range(n):
                e = np.exp(x[r, k] - m)
                out[r, k] = e
                s += e
            for k in range(n):
                out[r, k] /= s

    def softmax_fwd_nb(x2d):
        out = np.empty_like(x2d)
        _softmax_fwd_2d(np.ascontiguousarray(x2d), out)
        return out

    @njit(cache=True)
    def _softmax_bwd_2d(y, g, out):
        rows, n = y.shape
        for r in range(rows):
            dot = 0.0
            for k in range(n):
                dot += y[r, k] * g[r, k]
            for k in range(n):
                out[r, k] = y[r, k] * (g[r, k] - dot)

    def softmax_bwd_nb(y2d, g2d):
        out = np.empty_like(y2d)
        _softmax_bwd_2d(np.ascontiguousarray(y2d), np.ascontiguousarray(g2d), out)
        return out

    @njit(cache=True)
    def _onlstm_combine_fwd_flat(f, i, mf, mi, chat, cprev, f_eff, i_eff, c):
        for k in range(f.size):
            fe = mf[k] * (f[k] * mi[k] + 1.0 - mi[k])
            ie = mi[k] * (i[k] * mf[k] + 1.0 - mf[k])
            f_eff[k] = fe
            i_eff[k] = ie
            c[k] = fe * cprev[k] + ie * chat[k]

    def onlstm_combine_fwd_nb(f, i, mf, mi, chat, cprev):
        f_eff = np.empty_like(f)
        i_eff = np.empty_like(f)
        c = np.empty_like(f)
        _onlstm_combine_fwd_flat(
            f.ravel(), i.ravel(), np.ascontiguousarray(mf).ravel(),
            np.ascontiguousarray(mi).ravel(), chat.ravel(), cprev.ravel(),
            f_eff.ravel(), i_eff.ravel(), c.ravel(),
        )
        return f_eff, i_eff, c

    @njit(cache=True)
    def _onlstm_combine_bwd_flat(f, i, mf, mi, chat, cprev, f_eff, i_eff, gc,
                                 gf, gi, gmf, gmi, gchat, gcprev):
        for k in range(f.size):
            gfe = gc[k] * cprev[k]
            gie = gc[k] * chat[k]
            gf[k] = gfe * mf[k] * mi[k]
            gi[k] = gie * mi[k] * mf[k]
            gmf[k] = gfe * (f[k] * mi[k] + 1.0 - mi[k]) + gie * mi[k] * (i[k] - 1.0)
            gmi[k] = gfe * mf[k] * (f[k] - 1.0) + gie * (i[k] * mf[k] + 1.0 - mf[k])
            gchat[k] = gc[k] * i_eff[k]
            gcprev[k] = gc[k] * f_eff[k]

    def onlstm_combine_bwd_nb(f, i, mf, mi, chat, cprev, f_eff, i_eff, gc):
        outs = tuple(np.empty_like(f) for _ in range(6))
        _onlstm_combine_bwd_flat(
            f.ravel(), i.ravel(), np.ascontiguousarray(mf).ravel(),
            np.ascontiguousarray(mi).ravel(), chat.ravel(), cprev.ravel(),
            f_eff.ravel(), i_eff.ravel(), np.ascontiguousarray(gc).ravel(),
            *(o.ravel() for o in outs),
        )
        return outs

    @njit(cache=True)
    def _lstm_combine_fwd_flat(f, i, chat, cprev, c):
        for k in range(f.size):
            c[k] = f[k] * cprev[k] + i[k] * chat[k]

    def lstm_combine_fwd_nb(f, i, chat, cprev):
        c = np.empty_like(f)
        _lstm_combine_fwd_flat(f.ravel(), i.ravel(), chat.ravel(), cprev.ravel(), c.ravel())
        return c

    @njit(cache=True)
    def _lstm_combine_bwd_flat(f, i, chat, cprev, gc, gf, gi, gchat, gcprev):
        for k in range(f.size):
            gf[k] = gc[k] * cprev[k]
            gi[k] = gc[k] * chat[k]
            gchat[k] = gc[k] * i[k]
            gcprev[k] = gc[k] * f[k]

    def lstm_combine_bwd_nb(f, i, chat, cprev, gc):
        outs = tuple(np.empty_like(f) for _ in range(4))
        _lstm_combine_bwd_flat(f.ravel(), i.ravel(), chat.ravel(), cprev.ravel(),
                               np.ascontiguousarray(gc).ravel(), *(o.ravel() for o in outs))
        return outs

    @njit(cache=True)
    def _cross_entropy_fwd_2d(x, ids, out):
        rows, n = x.shape
        for r in range(rows):
            m = x[r, 0]
            for k in range(1, n):
                if x[r, k] > m:
                    m = x[r, k]
            s = 0.0
            for k in range(n):
                s += np.exp(x[r, k] - m)
            out[r] = m + np.log(s) - x[r, ids[r]]

    def cross_entropy_fwd_nb(logits2d, ids):
        out = np.empty(logits2d.shape[0], dtype=np.float64)
        _cross_entropy_fwd_2d(np.ascontiguousarray(logits2d), ids, out)
        return out

    @njit(cache=True)
    def _cross_entropy_bwd_2d(x, ids, g, out):
        rows, n = x.shape
        for r in range(rows):
            m = x[r, 0]
            for k in range(1, n):
                if x[r, k] > m:
                    m = x[r, k]
            s = 0.0
            for k in range(n):
                e = np.exp(x[r, k] - m)
                out[r, k] = e
                s += e
            for k in range(n):
                out[r, k] = out[r, k] / s * g[r]
            out[r, ids[r]] -= g[r]

    def cross_entropy_bwd_nb(logits2d, ids, g):
        out = np.empty_like(logits2d)
        _cross_entropy_bwd_2d(np.ascontiguousarray(logits2d), ids,
                              np.ascontiguousarray(g), out)
        return out

    _NB_IMPL = {
        "sigmoid_fwd": sigmoid_fwd_nb,
        "sigmoid_bwd": sigmoid_bwd_nb,
        "tanh_bwd": tanh_bwd_nb,
        "softmax_fwd": softmax_fwd_nb,
        "softmax_bwd": softmax_bwd_nb,
        "onlstm_combine_fwd": onlstm_combine_fwd_nb,
        "onlstm_combine_bwd": onlstm_combine_bwd_nb,
        "lstm_combine_fwd": lstm_combine_fwd_nb,
        "lstm_combine_bwd": lstm_combine_bwd_nb,
        "cross_entropy_fwd": cross_entropy_fwd_nb,
        "cross_entropy_bwd": cross_entropy_bwd_nb,
    }


IMPLS = {"numpy": _NP_IMPL, "numba": _NB_IMPL}
_ACTIVE_IMPL = _NB_IMPL if backend.ACTIVE == "numba" else _NP_IMPL

sigmoid_fwd = _ACTIVE_IMPL["sigmoid_fwd"]
sigmoid_bwd = _ACTIVE_IMPL["sigmoid_bwd"]
tanh_bwd = _ACTIVE_IMPL["tanh_bwd"]
softmax_fwd = _ACTIVE_IMPL["softmax_fwd"]
softmax_bwd = _ACTIVE_IMPL["softmax_bwd"]
onlstm_combine_fwd = _ACTIVE_IMPL["onlstm_combine_fwd"]
onlstm_combine_bwd = _ACTIVE_IMPL["onlstm_combine_bwd"]
lstm_combine_fwd = _ACTIVE_IMPL["lstm_combine_fwd"]
lstm_combine_bwd = _ACTIVE_IMPL["lstm_combine_bwd"]
cross_entropy_fwd = _ACTIVE_IMPL["cross_entropy_fwd"]
cross_entropy_bwd = _ACTIVE_IMPL["cross_entropy_bwd"]


def warmup():
    """Trigger JIT compilation of every active kernel on tiny inputs."""
    x = np.linspace(-2.0, 2.0, 12).reshape(3, 4)
    y = sigmoid_fwd(x)
    sigmoid_bwd(y, x)
    tanh_bwd(np.tanh(x), x)
    p = softmax_fwd(x)
    softmax_bwd(p, x)
    ids = np.array([0, 1, 3], dtype=np.int64)
    cross_entropy_bwd(x, ids, cross_entropy_fwd(x, ids))
    g = (y, p / p.sum(), y, p, x, x)
    fe, ie, c = onlstm_combine_fwd(*g)
    onlstm_combine_bwd(*g, fe, ie, x)
    lstm_combine_bwd(y, y, x, x, lstm_combine_fwd(y, y, x, x).copy())

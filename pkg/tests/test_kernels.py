"""The numba and numpy kernel paths must agree to float64 round-off."""

import numpy as np
import pytest

from onlstm import kernels

pytestmark = pytest.mark.skipif(
    kernels.IMPLS["numba"] is None, reason="numba backend not active")


def _pair(name):
    return kernels.IMPLS["numpy"][name], kernels.IMPLS["numba"][name]


def _agree(a, b, tol=1e-14):
    a = (a,) if isinstance(a, np.ndarray) else a
    b = (b,) if isinstance(b, np.ndarray) else b
    for x, y in zip(a, b):
        assert np.max(np.abs(x - y)) <= tol


def test_sigmoid_paths_agree(rng):
    x = rng.normal(scale=30.0, size=(17, 9))
    f_np, f_nb = _pair("sigmoid_fwd")
    y_np, y_nb = f_np(x), f_nb(x)
    _agree(y_np, y_nb)
    g = rng.normal(size=x.shape)
    b_np, b_nb = _pair("sigmoid_bwd")
    _agree(b_np(y_np, g), b_nb(y_np, g))


def test_tanh_bwd_paths_agree(rng):
    y = np.tanh(rng.normal(size=(5, 12)))
    g = rng.normal(size=y.shape)
    b_np, b_nb = _pair("tanh_bwd")
    _agree(b_np(y, g), b_nb(y, g))


def test_softmax_paths_agree(rng):
    x = rng.normal(scale=8.0, size=(11, 23))
    f_np, f_nb = _pair("softmax_fwd")
    y_np, y_nb = f_np(x), f_nb(x)
    _agree(y_np, y_nb)
    g = rng.normal(size=x.shape)
    b_np, b_nb = _pair("softmax_bwd")
    _agree(b_np(y_np, g), b_nb(y_np, g))


def test_combine_paths_agree(rng):
    shape = (9, 16)
    f, i, mf, mi = (rng.uniform(0, 1, size=shape) for _ in range(4))
    chat, cprev, gc = (rng.normal(size=shape) for _ in range(3))

    f_np, f_nb = _pair("onlstm_combine_fwd")
    out_np, out_nb = f_np(f, i, mf, mi, chat, cprev), f_nb(f, i, mf, mi, chat, cprev)
    _agree(out_np, out_nb)
    fe, ie, _ = out_np
    b_np, b_nb = _pair("onlstm_combine_bwd")
    _agree(b_np(f, i, mf, mi, chat, cprev, fe, ie, gc),
           b_nb(f, i, mf, mi, chat, cprev, fe, ie, gc))

    f_np, f_nb = _pair("lstm_combine_fwd")
    _agree(f_np(f, i, chat, cprev), f_nb(f, i, chat, cprev))
    b_np, b_nb = _pair("lstm_combine_bwd")
    _agree(b_np(f, i, chat, cprev, gc), b_nb(f, i, chat, cprev, gc))


def test_cross_entropy_paths_agree(rng):
    logits = rng.normal(scale=5.0, size=(13, 31))
    ids = rng.integers(0, 31, size=13)
    g = rng.normal(size=13)
    f_np, f_nb = _pair("cross_entropy_fwd")
    _agree(f_np(logits, ids), f_nb(logits, ids))
    b_np, b_nb = _pair("cross_entropy_bwd")
    _agree(b_np(logits, ids, g), b_nb(logits, ids, g))


def test_noncontiguous_inputs_accepted(rng):
    x = rng.normal(size=(6, 20))[:, ::2]  # strided view
    f_np, f_nb = _pair("sigmoid_fwd")
    _agree(f_np(np.ascontiguousarray(x)), f_nb(x))

#!/usr/bin/env python3
"""Compare the numba and pure-numpy kernel paths.

Times each hot kernel on training-shaped arrays, then a full forward+backward
pass of the recurrent language model. Run as:

    python benchmarks/bench_backends.py [--batch 64] [--steps 12] [--repeats 30]

The active backend for the end-to-end row follows ONLSTM_BACKEND; per-kernel
rows always measure both implementations when numba is importable.
"""

import argparse
import time

import numpy as np

from onlstm import backend, kernels
from onlstm.models import LanguageModel, LanguageModelConfig
from onlstm.tensor import backward, cross_entropy, mean_all


def time_fn(fn, repeats):
    fn()  # warm (JIT + caches)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def kernel_cases(batch):
    rng = np.random.default_rng(0)
    shape = (batch, 64)
    gates = {k: rng.uniform(0, 1, size=shape) for k in ("f", "i", "mf", "mi")}
    chat, cprev, g = (rng.normal(size=shape) for _ in range(3))
    logits = rng.normal(size=(batch * 12, 60))
    ids = rng.integers(0, 60, size=batch * 12)
    probs = None
    return {
        "sigmoid_fwd": lambda impl: impl["sigmoid_fwd"](chat),
        "sigmoid_bwd": lambda impl: impl["sigmoid_bwd"](gates["f"], g),
        "tanh_bwd": lambda impl: impl["tanh_bwd"](np.tanh(chat), g),
        "softmax_fwd": lambda impl: impl["softmax_fwd"](logits),
        "softmax_bwd": lambda impl: impl["softmax_bwd"](
            impl["softmax_fwd"](logits), logits),
        "onlstm_combine_fwd": lambda impl: impl["onlstm_combine_fwd"](
            gates["f"], gates["i"], gates["mf"], gates["mi"], chat, cprev),
        "onlstm_combine_bwd": lambda impl: impl["onlstm_combine_bwd"](
            gates["f"], gates["i"], gates["mf"], gates["mi"], chat, cprev,
            gates["f"], gates["i"], g),
        "lstm_combine_fwd": lambda impl: impl["lstm_combine_fwd"](
            gates["f"], gates["i"], chat, cprev),
        "cross_entropy_fwd": lambda impl: impl["cross_entropy_fwd"](logits, ids),
        "cross_entropy_bwd": lambda impl: impl["cross_entropy_bwd"](
            logits, ids, ids.astype(np.float64)),
    }


def bench_kernels(batch, repeats):
    cases = kernel_cases(batch)
    numpy_impl = kernels.IMPLS["numpy"]
    numba_impl = kernels.IMPLS["numba"]
    print(f"\nper-kernel microbenchmarks (batch={batch}, repeats={repeats})")
    header = f"{'kernel':24} {'numpy us':>10} {'numba us':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, case in cases.items():
        t_np = time_fn(lambda: case(numpy_impl), repeats) * 1e6
        if numba_impl is None:
            print(f"{name:24} {t_np:10.1f} {'-':>10} {'-':>8}")
            continue
        t_nb = time_fn(lambda: case(numba_impl), repeats) * 1e6
        print(f"{name:24} {t_np:10.1f} {t_nb:10.1f} {t_np / t_nb:7.2f}x")


def bench_end_to_end(batch, steps, repeats):
    rng = np.random.default_rng(0)
    cfg = LanguageModelConfig(vocab_size=60, embed_size=64, hidden_sizes=(64, 64),
                              chunk_factor=8, cell="onlstm", tie_weights=True)
    model = LanguageModel(cfg, rng)
    ids = rng.integers(0, 60, size=(batch, steps + 1))
    inputs, targets = ids[:, :-1], ids[:, 1:].T.reshape(-1)

    def fwd_bwd():
        model.zero_grad()
        logits, _, _ = model.forward_batch(inputs)
        backward(mean_all(cross_entropy(logits, targets)))

    dt = time_fn(fwd_bwd, repeats) * 1e3
    tokens = batch * steps
    print(f"\nend-to-end ({backend.ACTIVE} backend): 2x64 ordered-neurons LM, "
          f"batch={batch}, steps={steps}")
    print(f"  forward+backward: {dt:.1f} ms/batch  ({tokens / dt * 1e3:,.0f} tokens/s)")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--steps", type=int, default=12)
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()
    print(f"active backend: {backend.ACTIVE} "
          f"(numba {'available' if kernels.IMPLS['numba'] else 'missing'})")
    kernels.warmup()
    bench_kernels(args.batch, args.repeats)
    bench_end_to_end(args.batch, args.steps, args.repeats)


if __name__ == "__main__":
    main()

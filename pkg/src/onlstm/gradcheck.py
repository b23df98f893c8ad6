"""Central-difference gradient oracle, independent of the tape."""

import numpy as np

from .errors import ContractError, NumericsError
from .tensor import Parameter, Tensor, no_grad


def finite_diff_grad(loss_fn, params: list[Parameter], epsilon: float = 1e-5) -> list[Tensor]:
    """Numerical gradient of `loss_fn()` w.r.t. each parameter's entries.

    `loss_fn` must recompute the loss from the parameters' current values and
    return a float. Uses (f(x+eps) - f(x-eps)) / 2 eps per coordinate and
    never records a tape.
    """
    if epsilon <= 0:
        raise ContractError("finite_diff_grad: epsilon must be > 0")
    grads = []
    with no_grad():
        for p in params:
            flat = p.data.reshape(-1)
            g = np.zeros_like(flat)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + epsilon
                hi = float(loss_fn())
                flat[k] = orig - epsilon
                lo = float(loss_fn())
                flat[k] = orig
                if not (np.isfinite(hi) and np.isfinite(lo)):
                    raise NumericsError(
                        f"finite_diff_grad: non-finite loss perturbing {p.name}[{k}]")
                g[k] = (hi - lo) / (2.0 * epsilon)
            grads.append(Tensor(g.reshape(p.data.shape)))
    return grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Max per-coordinate |a-n| / max(|a|, |n|, floor)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def check_gradients(loss_fn, params: list[Parameter], epsilon: float = 1e-5,
                    tolerance: float = 1e-4) -> list[tuple[str, float, bool]]:
    """Compare tape gradients already stored in `params` against the oracle.

    Returns one (name, relative_error, passed) row per parameter block.
    Caller runs forward+backward first so `p.grad` is populated.
    """
    numeric = finite_diff_grad(loss_fn, params, epsilon)
    report = []
    for p, n in zip(params, numeric):
        err = relative_error(p.grad, n.data)
        report.append((p.name, err, err < tolerance))
    return report

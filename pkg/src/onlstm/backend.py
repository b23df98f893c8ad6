"""Kernel backend selection.

The hot per-step gate math has two interchangeable implementations: numba
@njit loops and pure numpy. `ONLSTM_BACKEND` picks one:

    auto   use numba when importable, else numpy (default)
    numba  require numba, fail loudly if missing
    numpy  force the pure-numpy path

The choice is resolved once at import. `benchmarks/bench_backends.py`
compares the two.
"""

import os

_VALID = ("auto", "numba", "numpy")


def requested_backend() -> str:
    name = os.environ.get("ONLSTM_BACKEND", "auto").strip().lower()
    if name not in _VALID:
        raise ValueError(f"ONLSTM_BACKEND must be one of {_VALID}, got {name!r}")
    return name


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def resolve_backend() -> str:
    """Return the active backend name ("numba" or "numpy")."""
    req = requested_backend()
    if req == "numpy":
        return "numpy"
    if req == "numba":
        if not _numba_available():
            raise ImportError("ONLSTM_BACKEND=numba but numba is not importable")
        return "numba"
    return "numba" if _numba_available() else "numpy"


ACTIVE = resolve_backend()

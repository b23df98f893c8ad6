"""Ordered-neurons LSTM language models and the parsing pipeline around them."""

from . import backend
from .tensor import Parameter, Tensor, backward, no_grad
from .gradcheck import check_gradients, finite_diff_grad, relative_error
from .cell import CellParams, CellState, StepTrace, cumax, expand_chunks, lstm_step, onlstm_step

__version__ = "0.1.0"

__all__ = [
    "backend",
    "Parameter",
    "Tensor",
    "backward",
    "no_grad",
    "check_gradients",
    "finite_diff_grad",
    "relative_error",
    "CellParams",
    "CellState",
    "StepTrace",
    "cumax",
    "expand_chunks",
    "lstm_step",
    "onlstm_step",
    "__version__",
]

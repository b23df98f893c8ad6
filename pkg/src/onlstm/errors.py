"""Exception types shared across the package."""


class OnlstmError(Exception):
    """Base class for all package errors."""


class ShapeError(OnlstmError):
    """Operands have incompatible shapes."""


class ContractError(OnlstmError):
    """An operation was called outside its contract (bad arguments/state)."""


class NumericsError(OnlstmError):
    """A non-finite value reached a point where it must not propagate."""


class VocabularyError(OnlstmError):
    """A token id or token string is outside the model vocabulary."""


class DataError(OnlstmError):
    """A corpus/dataset file or record is malformed or inconsistent."""


class FormulaError(OnlstmError):
    """A logic formula failed to parse; carries the offending position."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message if position is None else f"{message} (at token {position})")
        self.position = position


class TreeError(OnlstmError):
    """A bracketed tree failed to parse; carries the line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ConfigError(OnlstmError):
    """Invalid configuration value or combination."""


class CheckpointError(OnlstmError):
    """Checkpoint file is corrupt or inconsistent with the config."""

"""Exception types shared across the package."""


class ICNetError(Exception):
    """Base class for all errors raised by icnet."""


class DimensionError(ICNetError, ValueError):
    """Operand shapes do not fit together."""


class ContractError(ICNetError, ValueError):
    """A precondition of an operation was violated."""


class LabelError(ICNetError, ValueError):
    """A class label lies outside ``[0, n_classes)``."""


class NumericError(ICNetError, ArithmeticError):
    """A computation produced a non-finite value."""


class FormatError(ICNetError, ValueError):
    """A data or parameter file could not be parsed."""


class VocabularyError(ICNetError, ValueError):
    """A categorical value was not seen in the training split."""


class ConfigError(ICNetError, ValueError):
    """An experiment config failed strict validation."""


class DivergenceError(ICNetError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")

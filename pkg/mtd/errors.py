"""
errors.py
---------
Exception hierarchy shared by every module. Callers can catch ``MtdError``
to handle anything raised by the package.
"""


class MtdError(Exception):
    """Base class for all package errors."""


class DimensionError(MtdError, ValueError):
    """Operand shapes do not agree."""


class NumericError(MtdError, ArithmeticError):
    """A non-finite value or a division by zero was produced."""


class ContractError(MtdError):
    """A documented precondition was violated by the caller."""


class DatasetError(MtdError):
    """A dataset file is missing, malformed or inconsistent."""


class SimulationError(MtdError):
    """The requested incompleteness cannot be realised."""


class TrainingError(MtdError):
    """Training aborted (carries epoch/batch context in the message)."""


class UndefinedMetricError(MtdError):
    """Every sample (or label) was degenerate for the requested metric."""


class ConfigError(MtdError):
    """A configuration key or value is invalid."""

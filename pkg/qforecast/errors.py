"""Exception hierarchy for qforecast.

Every error subclasses a built-in (ValueError or RuntimeError) so callers
can keep catching the broad family.
"""


class QForecastError(Exception):
    """Base class for all qforecast errors."""


class DomainError(QForecastError, ValueError):
    """An argument lies outside the domain of an operation."""


class EncodingError(DomainError):
    """A classical vector cannot be written into a register."""


class CapacityError(EncodingError):
    """More features than the register has amplitudes."""


class DegenerateReadoutError(DomainError):
    """Readout wire carries no probability mass on levels 0 and 1."""


class DegenerateMetricError(DomainError):
    """A metric is undefined for the given inputs (zero spread, empty counts)."""


class ConfigError(DomainError):
    """Invalid training or agent configuration."""


class DataError(QForecastError, ValueError):
    """Market data could not be ingested or transformed."""


class FormatError(DataError):
    """The input file does not have the expected layout."""


class ParseError(DataError):
    """A row could not be parsed."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RowValidationError(ParseError):
    """A parsed row violates the OHLCV invariants."""


class OrderingError(DataError):
    """Dates are not strictly increasing."""


class NormalizationError(DataError):
    """A feature column cannot be min-max scaled."""


class InsufficientDataError(DataError):
    """Too few rows or samples for the requested transformation."""


class TrainingError(QForecastError, RuntimeError):
    """A model failed to train."""

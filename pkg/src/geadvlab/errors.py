"""Exception types shared across the package.

Every error raised by geadvlab derives from :class:`GeAdvLabError`, so callers
(and the CLI exit-code mapping) can distinguish our failures from genuine bugs.
"""


class GeAdvLabError(Exception):
    """Base class for all geadvlab errors."""


class ShapeError(GeAdvLabError):
    """Tensor or array dimensions do not satisfy an operation's contract."""


class DomainError(GeAdvLabError):
    """A value is outside the mathematical domain of an operation."""


class ContractError(GeAdvLabError):
    """An API precondition was violated (e.g. backward on a non-scalar)."""


class ConfigError(GeAdvLabError):
    """Invalid or inconsistent configuration."""


class FormatError(GeAdvLabError):
    """A file does not conform to its declared binary/text format."""


class ConsistencyError(FormatError):
    """Two related artifacts disagree (e.g. image/label counts)."""


class CorruptionError(FormatError):
    """Stored payload fails its integrity check."""


class NumericalError(GeAdvLabError):
    """Training or evaluation produced non-finite values."""


class AuditError(GeAdvLabError):
    """An adversarial sample violated the perturbation budget audit."""


class MeasurementError(GeAdvLabError):
    """A timing measurement was unusable (e.g. zero elapsed time)."""

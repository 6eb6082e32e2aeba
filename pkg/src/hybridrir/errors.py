"""Exception taxonomy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for configuration problems, 3 for numeric problems, 4 for I/O.
"""


class HybridRirError(Exception):
    exit_code = 1


class ConfigError(HybridRirError):
    exit_code = 2


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


class GeometryError(ValidationError):
    pass


class RangeError(ConfigError, ValueError):
    pass


class NumericError(HybridRirError):
    exit_code = 3


class BudgetExceeded(NumericError):
    pass


class EmptyEvents(NumericError):
    pass


class SilentInput(NumericError):
    pass


class SilentChannel(SilentInput):
    pass


class SilentBRIR(SilentInput):
    pass


class RateTooLow(NumericError):
    pass


class RateMismatch(NumericError):
    pass


class OrderTooHigh(NumericError):
    pass


class DegenerateVariance(NumericError):
    pass


class MissingDirection(ConfigError):
    pass


class IOFailure(HybridRirError):
    exit_code = 4


class MissingResults(IOFailure):
    pass


class ClampWarning(UserWarning):
    """Raised through :mod:`warnings` when a calibration target is unreachable."""

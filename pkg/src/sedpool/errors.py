"""Exception hierarchy shared by every sedpool module."""


class SedError(Exception):
    """Base class for all sedpool errors."""


class InvalidInput(SedError, ValueError):
    """An argument is outside the domain of the operation."""


class ShapeError(SedError, ValueError):
    """Array extents do not agree with what an operation requires."""


class ConfigError(SedError, ValueError):
    """A preset, training config or parameter set is inconsistent."""


class NumericalError(SedError, ArithmeticError):
    """A NaN or infinity appeared where finite values are required."""


class DataError(SedError, ValueError):
    """Annotations or detections refer to unknown clips/classes or are degenerate."""


class ParseError(SedError, ValueError):
    """A text table could not be parsed.  Carries the offending line number."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.path = path
        self.line = line

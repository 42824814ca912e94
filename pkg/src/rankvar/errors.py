"""Exception hierarchy. The CLI maps each class to an exit code."""


class RankvarError(Exception):
    pass


class DomainError(RankvarError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConfigError(RankvarError, ValueError):
    """Invalid experiment or command configuration."""


class DataError(RankvarError, ValueError):
    """Malformed or invalid input data.

    ``line`` is the 1-based input line when the problem is tied to one.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FitError(RankvarError, ValueError):
    pass


class CalibrationError(RankvarError):
    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class ResourceError(RankvarError):
    pass

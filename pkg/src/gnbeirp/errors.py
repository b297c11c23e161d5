"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ConfigError(ValueError):
    """Invalid configuration.

    ``line`` is the 1-based line in the source file when the error can be
    anchored to one.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GridMismatchError(ValueError):
    """Patterns sampled on different angular grids were combined."""


class UndefinedWidthError(ValueError):
    """A half-power crossing could not be located along a pattern cut."""


class RankDeficientError(ValueError):
    """A channel does not support the requested number of layers."""


class EmptySubsetError(ValueError):
    """A statistic was requested over an empty codeword subset."""

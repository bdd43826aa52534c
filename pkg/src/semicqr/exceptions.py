"""Exception hierarchy shared across the package."""


class SemiCQRError(Exception):
    """Base class for all errors raised by semicqr."""


class DatasetError(SemiCQRError, ValueError):
    """Inconsistent or malformed observation block."""


class ExtrapolationError(SemiCQRError, ValueError):
    """A curve was asked for a value outside its grid hull."""


class InvalidBandwidthError(SemiCQRError, ValueError):
    pass


class InsufficientLocalDataError(SemiCQRError):
    """The kernel window holds too few observations for the local design."""


class InvalidProblemError(SemiCQRError, ValueError):
    pass


class OracleTooLargeError(SemiCQRError):
    pass


class DegenerateDensityError(SemiCQRError, ValueError):
    """The error density vanishes at a quantile where it must be positive."""


class InputError(SemiCQRError, ValueError):
    """Bad user input (CSV contents, role declarations, config)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line

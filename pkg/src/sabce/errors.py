"""Exception types shared across the package.

The CLI maps these onto exit codes: ``ConfigError`` -> 1, ``DataError`` -> 2,
``NumericalError`` -> 3.
"""


class SabceError(Exception):
    pass


class ConfigError(SabceError, ValueError):
    pass


class DataError(SabceError, ValueError):
    pass


class NumericalError(SabceError, ArithmeticError):
    pass


class DivergenceError(NumericalError):
    """Raised by the trainer when the loss stops being finite.

    ``last_finite`` holds a checkpoint (see :mod:`sabce.checkpoint`) of the last
    epoch whose loss was finite, so sweeps can log it and move on.
    """

    def __init__(self, message, epoch=None, last_finite=None):
        super().__init__(message)
        self.epoch = epoch
        self.last_finite = last_finite

"""Exception types shared across the package."""


class ShapeMismatchError(ValueError):
    """Operands have incompatible or unsupported shapes."""


class ConfigurationError(ValueError):
    """A configuration value is missing, inconsistent or out of range."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class DivergenceError(NumericError):
    """An iterative solver blew up.

    Carries the last finite iterate and the iteration index at which the
    blow-up was detected, so callers can inspect or restart.
    """

    def __init__(self, message, last_iterate=None, iteration=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iteration = iteration


class AdapterError(RuntimeError):
    """The external denoiser subprocess violated the wire protocol or died."""

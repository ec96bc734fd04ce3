"""Exception types raised across the package."""


class SteinMIError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(SteinMIError, ValueError):
    """An argument violates a shape, range or dimension contract."""


class InsufficientSamplesError(SteinMIError, ValueError):
    """Too few samples to build a kernel matrix or an estimator."""


class DegenerateSpectrumError(SteinMIError, ValueError):
    """No strictly positive eigenvalue is available for truncation."""


class ConvergenceError(SteinMIError, RuntimeError):
    """An iterative routine hit its iteration cap.

    Attributes:
        residual: Off-diagonal norm left when the iteration stopped.
    """

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual

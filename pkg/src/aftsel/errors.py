"""Exception types shared across the package."""


class ConvergenceError(RuntimeError):
    """An iterative optimizer hit its iteration cap without converging.

    Carries the last iterate so callers can inspect or restart from it.
    """

    def __init__(self, message, last_params=None, grad_norm=None):
        super().__init__(message)
        self.last_params = last_params
        self.grad_norm = grad_norm


class NumericalError(RuntimeError):
    """A numerical precondition failed (e.g. an indefinite Hessian at a
    reported mode)."""


class DatasetFormatError(ValueError):
    """A dataset file violated the expected CSV layout or value domain."""

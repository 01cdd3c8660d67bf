class StateError(ValueError):
    """Raised when a matrix is not a valid (or suitably normalized) state."""


class ConvergenceError(RuntimeError):
    """An optimizer stopped without converging; the best point found is kept on ``best``."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best

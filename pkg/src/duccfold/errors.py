"""Exception types shared across the package.

Invalid arguments raise plain ``ValueError``.
"""


class ConvergenceError(RuntimeError):
    """An iterative solver ran out of iterations or diverged.

    ``last_value`` holds the final energy (SCF) or residual norm (CC).
    """

    def __init__(self, message: str, last_value: float = float("nan"), iterations: int = 0):
        super().__init__(message)
        self.last_value = last_value
        self.iterations = iterations


class DegenerateMomentsError(ValueError):
    """Moment matrix is singular: the trial vector spans too small a Krylov space."""


class RootFailureError(RuntimeError):
    """The moment polynomial has no real roots."""

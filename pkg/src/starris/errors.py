"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid scenario or experiment configuration."""


class GeometryError(ValueError):
    """Physically meaningless geometry (non-positive distance, bad angles)."""


class SolverError(RuntimeError):
    """A numerical subproblem could not be solved."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)
        self.iteration = iteration


class InvariantError(RuntimeError):
    """An internal invariant was violated (dimension mismatch, monotonicity)."""


class ProblemError(ValueError):
    """Malformed optimization problem (non-Hermitian or indefinite data)."""

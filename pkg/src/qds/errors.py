"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a curve, scheme, or experiment config is invalid."""


class GridMismatchError(ValueError):
    """Raised when two paths are combined over different t-grids."""


class ConvergenceError(RuntimeError):
    """Iteration failed to reach tolerance; carries the last residual."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual

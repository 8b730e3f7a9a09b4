"""Exception types raised by twistlab."""


class TwistLabError(Exception):
    """Base class for all library errors."""


class GeometryError(TwistLabError, ValueError):
    """Degenerate or invalid cross-section geometry."""


class ResolutionError(TwistLabError, ValueError):
    """A grid does not resolve a feature it is required to resolve.

    ``min_points`` carries the smallest admissible value when one can be computed.
    """

    def __init__(self, message, min_points=None):
        super().__init__(message)
        self.min_points = min_points


class SolverError(TwistLabError, RuntimeError):
    """An eigen- or linear solve failed; ``residuals`` holds diagnostics."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ConfigError(TwistLabError, ValueError):
    """Configuration rejected; ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.violations))
